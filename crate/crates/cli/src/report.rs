//! Output-directory bookkeeping: row files, plain-text artifacts, and the
//! run manifest with checksums.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// One cell of an output row.
pub enum Cell {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.12e}"),
            Cell::Str(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => serde_json::json!(v),
            Cell::Float(v) => serde_json::json!(v),
            Cell::Str(s) => serde_json::json!(s),
        }
    }
}

/// Collects artifacts for one run and writes `manifest.json` at the end.
pub struct Report {
    dir: PathBuf,
    format: Format,
    subcommand: String,
    params: serde_json::Value,
    outputs: Vec<serde_json::Value>,
    started: Instant,
}

impl Report {
    pub fn new(
        dir: &Path,
        format: Format,
        subcommand: &str,
        params: serde_json::Value,
    ) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Report {
            dir: dir.to_path_buf(),
            format,
            subcommand: subcommand.to_string(),
            params,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write a table under `name` (extension chosen by the format) and track
    /// it in the manifest.
    pub fn write_rows(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<Cell>],
    ) -> std::io::Result<PathBuf> {
        let (file, content) = match self.format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&header.join(","));
                out.push('\n');
                for row in rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
                (format!("{name}.csv"), out)
            }
            Format::Json => {
                let items: Vec<serde_json::Value> = rows
                    .iter()
                    .map(|row| {
                        let map: serde_json::Map<String, serde_json::Value> = header
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect();
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let mut out = serde_json::to_string_pretty(&items).expect("serialize rows");
                out.push('\n');
                (format!("{name}.json"), out)
            }
        };
        self.write_text(&file, &content)
    }

    /// Write any text artifact and track it.
    pub fn write_text(&mut self, file: &str, content: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(file);
        fs::write(&path, content)?;
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.outputs.push(serde_json::json!({
            "file": file,
            "sha256": hex,
            "bytes": content.len(),
        }));
        Ok(path)
    }

    /// Write `manifest.json` (parameters, version, wall time, checksums).
    pub fn finish(self, seed: Option<u64>, threads: Option<usize>) -> std::io::Result<()> {
        let manifest = serde_json::json!({
            "tool": "gw",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "params": self.params,
            "seed": seed,
            "threads": threads,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "outputs": self.outputs,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("serialize manifest");
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)
    }
}

/// Filename-safe rendering of a float parameter (40.0 → "40", 1.5 → "1p5").
pub fn tag(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v}").replace('.', "p").replace('-', "m")
    }
}
