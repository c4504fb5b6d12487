//! `gw` — experiment runner for the gauge workbench.
//!
//! Each subcommand reproduces one family of numerical experiments (spectra,
//! mass and grid-spacing scans, Trotter fidelity, singlet projection, the
//! Z₂/Z_N demos, resource counts) and writes CSV/JSON artifacts plus a run
//! manifest into `--out`.

mod commands;
mod report;

use clap::{Args, Parser, Subcommand};

use crate::report::Format;

#[derive(Parser)]
#[command(name = "gw", version, about = "Gauge workbench experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "gw-out")]
    out: std::path::PathBuf,

    /// Row-file format.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    format: Format,

    /// Rayon thread count (defaults to the machine).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for operations that draw random states.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format {s:?}, expected csv or json")),
    }
}

/// Model selection shared by the S^n experiment subcommands.
#[derive(Args, Clone)]
struct ModelArgs {
    /// Preset name from presets.json (overrides the individual flags).
    #[arg(long)]
    preset: Option<String>,

    /// Sphere dimension n (the model has n+1 bosons).
    #[arg(long)]
    n: Option<usize>,

    /// Mass parameter(s) m.
    #[arg(long = "m", value_delimiter = ',')]
    masses: Vec<f64>,

    /// Grid half-width R.
    #[arg(long = "R")]
    r: Option<f64>,

    /// Qubits per boson (Λ = 2^Q).
    #[arg(long = "Q")]
    q: Option<u32>,

    /// Truncation level(s) Λ per boson.
    #[arg(long = "lambda", value_delimiter = ',')]
    lambdas: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-energy spectrum with degeneracy grouping.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of eigenpairs.
        #[arg(long, default_value_t = 24)]
        levels: usize,
        /// Relative gap tolerance for degeneracy grouping.
        #[arg(long, default_value_t = 1e-6)]
        group_tol: f64,
        /// Also dump the potential Pauli expansion to this path.
        #[arg(long = "dump-pauli")]
        dump_pauli: Option<std::path::PathBuf>,
    },
    /// Gap deviations vs target over masses, with 1/m-quadratic extrapolation.
    ScanMass {
        #[command(flatten)]
        model: ModelArgs,
        /// Gap specs "level:target", e.g. 1:0.5.
        #[arg(long = "gap", value_delimiter = ',')]
        gaps: Vec<String>,
        /// Starting Λ for the per-mass convergence loop.
        #[arg(long, default_value_t = 16)]
        lambda0: usize,
    },
    /// Spectrum error against the Λ-doubling reference, vs √m·δx.
    ScanDeltax {
        #[command(flatten)]
        model: ModelArgs,
        /// Levels tracked.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Continuum-normalized ground-state density on the grid.
    GroundDensity {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Trotter-vs-exact fidelity curves.
    Trotter {
        #[command(flatten)]
        model: ModelArgs,
        /// Step size Δt (exclusive with --mdt).
        #[arg(long)]
        dt: Option<f64>,
        /// Fixed m·Δt product (Δt = mdt/m per mass).
        #[arg(long)]
        mdt: Option<f64>,
        /// Total evolution time.
        #[arg(long, default_value_t = 5.0)]
        t: f64,
        /// Initial state: "ground", "levels:0,1,3", or "random".
        #[arg(long, default_value = "ground")]
        initial: String,
        /// Time between fidelity samples.
        #[arg(long, default_value_t = 0.1)]
        sample_dt: f64,
    },
    /// U(1) singlet projection with ⟨Ĝ²⟩ diagnostics over a Λ sweep.
    ProjectU1 {
        /// Preset name (g2-convergence).
        #[arg(long)]
        preset: Option<String>,
        /// Ancilla and link mass m.
        #[arg(long = "m")]
        mass: Option<f64>,
        /// Grid half-width R.
        #[arg(long = "R")]
        r: Option<f64>,
        /// Truncation levels Λ to sweep.
        #[arg(long = "lambda", value_delimiter = ',')]
        lambdas: Vec<usize>,
        /// Input x coordinate (default 1 − 2/Λ).
        #[arg(long)]
        x: Option<f64>,
        /// Input y coordinate.
        #[arg(long, default_value_t = 0.0)]
        y: f64,
    },
    /// Z₂ singlet-projection protocol, printing every step.
    Z2Demo {
        /// Number of link qubits.
        #[arg(long, default_value_t = 2)]
        links: usize,
        /// Input: "zeros" or "random".
        #[arg(long, default_value = "zeros")]
        input: String,
    },
    /// Z_N register averaging demo.
    ZnDemo {
        /// Number of registers.
        #[arg(long, default_value_t = 2)]
        links: usize,
        /// Qubits per register (N = 2^Q).
        #[arg(long = "Q", default_value_t = 2)]
        q: u32,
        /// Input: "basis" or "random".
        #[arg(long, default_value = "basis")]
        input: String,
    },
    /// Qubit and gate counts for the orbifold lattice.
    Resources {
        /// Gauge group size N.
        #[arg(long = "N")]
        n: usize,
        /// Qubits per boson Q.
        #[arg(long = "Q")]
        q: u32,
        /// Spatial dimensions d.
        #[arg(long = "d")]
        d: usize,
        /// Lattice volume V (sites).
        #[arg(long = "V")]
        v: usize,
    },
    /// Serialize a Hamiltonian's Pauli expansion to the line format.
    DumpPauli {
        /// Model: "sn" or "orbifold".
        #[arg(long, default_value = "sn")]
        model: String,
        /// Sphere dimension n (sn model).
        #[arg(long)]
        n: Option<usize>,
        /// Mass m.
        #[arg(long = "m")]
        mass: Option<f64>,
        /// Half-width R.
        #[arg(long = "R")]
        r: Option<f64>,
        /// Qubits per boson.
        #[arg(long = "Q")]
        q: Option<u32>,
        /// Gauge group size N (orbifold).
        #[arg(long = "N")]
        gauge_n: Option<usize>,
        /// Spatial dimensions d (orbifold).
        #[arg(long = "d")]
        d: Option<usize>,
        /// Lattice volume V (orbifold, one periodic dimension extent per d).
        #[arg(long = "V")]
        v: Option<usize>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
