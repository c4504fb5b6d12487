//! Hamiltonian builders: S^n benchmark models, the ξ ancilla Hamiltonian,
//! orbifold-lattice Pauli compilation, Wilson loops, and U(N)/SU(N)
//! generator bases.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::GwError;
use crate::kernels;
use crate::pauli::{multiply, p_pauli, x_pauli, PauliSum};
use crate::qgrid::{BosonRegister, DftEngine, ProductBasis, Rep, StateVector};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Kinetic part diagonal in the momentum representation plus a potential
/// diagonal in the coordinate representation; the matrix-free engine's
/// operator form.
pub struct SeparableHamiltonian {
    basis: ProductBasis,
    kinetic_coeffs: Vec<f64>,
    potential_diag: Vec<f64>,
    kinetic_diag: Vec<f64>,
    pauli_form: Option<PauliSum>,
    engine: DftEngine,
}

impl SeparableHamiltonian {
    /// `kinetic_coeffs[a]` multiplies p_a² on axis a (usually ½).
    pub fn new(
        basis: ProductBasis,
        kinetic_coeffs: Vec<f64>,
        potential_diag: Vec<f64>,
        pauli_form: Option<PauliSum>,
    ) -> Result<Self, GwError> {
        if kinetic_coeffs.len() != basis.n_axes() {
            return Err(GwError::invalid("one kinetic coefficient per axis"));
        }
        if potential_diag.len() != basis.dim() {
            return Err(GwError::invalid("potential length must equal basis dim"));
        }
        if potential_diag.iter().any(|v| !v.is_finite()) {
            return Err(GwError::invalid("potential must be finite"));
        }
        let coeffs = kinetic_coeffs.clone();
        let regs = basis.registers().to_vec();
        let mut kinetic_diag = vec![0.0; basis.dim()];
        {
            let b = basis.clone();
            kernels::map_inplace(&mut kinetic_diag, |flat, v| {
                let mut acc = 0.0;
                for (a, reg) in regs.iter().enumerate() {
                    let p = reg.momentum(b.axis_index(flat, a));
                    acc += coeffs[a] * p * p;
                }
                *v = acc;
            });
        }
        let engine = DftEngine::new(&basis);
        Ok(SeparableHamiltonian {
            basis,
            kinetic_coeffs,
            potential_diag,
            kinetic_diag,
            pauli_form,
            engine,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn engine(&self) -> &DftEngine {
        &self.engine
    }

    pub fn kinetic_coeffs(&self) -> &[f64] {
        &self.kinetic_coeffs
    }

    pub fn potential_diag(&self) -> &[f64] {
        &self.potential_diag
    }

    /// Σ_a c_a·p_a² on the momentum grid, flat codec order.
    pub fn kinetic_diag(&self) -> &[f64] {
        &self.kinetic_diag
    }

    pub fn pauli_form(&self) -> Option<&PauliSum> {
        self.pauli_form.as_ref()
    }

    /// out = (V + F⁻¹ K F)·inp with `work` as DFT buffer (len = dim).
    pub fn matvec_complex(&self, inp: &[Complex64], out: &mut [Complex64], work: &mut [Complex64]) {
        work.copy_from_slice(inp);
        self.engine.forward_all(work);
        {
            let kd = &self.kinetic_diag;
            kernels::map_inplace(work, |i, w| *w *= kd[i]);
        }
        self.engine.inverse_all(work);
        let (vd, w2) = (&self.potential_diag, &*work);
        kernels::map_inplace(out, |i, o| *o = vd[i] * inp[i] + w2[i]);
    }

    /// Real matvec: H is real symmetric in the coordinate basis, so the
    /// imaginary residue of the DFT round trip is pure rounding and dropping
    /// it applies the exactly-symmetric (H + Hᵀ)/2.
    pub fn matvec_real(&self, v: &[f64], out: &mut [f64], work: &mut [Complex64]) {
        kernels::map_inplace(work, |i, w| *w = Complex64::new(v[i], 0.0));
        self.engine.forward_all(work);
        {
            let kd = &self.kinetic_diag;
            kernels::map_inplace(work, |i, w| *w *= kd[i]);
        }
        self.engine.inverse_all(work);
        let (vd, w2) = (&self.potential_diag, &*work);
        kernels::map_inplace(out, |i, o| *o = vd[i] * v[i] + w2[i].re);
    }

    /// H|ψ⟩ for a coordinate-representation state.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector, GwError> {
        self.check_state(state)?;
        let mut out = state.clone();
        let mut work = vec![Complex64::ZERO; self.dim()];
        let mut res = vec![Complex64::ZERO; self.dim()];
        self.matvec_complex(state.amplitudes(), &mut res, &mut work);
        out.amplitudes_mut().copy_from_slice(&res);
        Ok(out)
    }

    /// ⟨ψ|H|ψ⟩ (real for Hermitian H; the real part is returned).
    pub fn expectation(&self, state: &StateVector) -> Result<f64, GwError> {
        let h_psi = self.apply(state)?;
        Ok(state.inner(&h_psi)?.re)
    }

    fn check_state(&self, state: &StateVector) -> Result<(), GwError> {
        if state.basis() != &self.basis {
            return Err(GwError::BasisMismatch);
        }
        for (axis, rep) in state.reps().iter().enumerate() {
            if *rep != Rep::Coordinate {
                return Err(GwError::RepresentationMismatch {
                    axis,
                    expected: "coordinate",
                    found: "momentum",
                });
            }
        }
        Ok(())
    }
}

/// S^n benchmark model: n+1 bosons with H = ½Σp² + (m²/8)(Σx² − 1)².
///
/// `lambda` is the truncation level per boson; the Pauli form of the
/// potential is attached when `lambda` is a power of two.
pub fn build_sn(
    n: usize,
    mass: f64,
    half_width: f64,
    lambda: usize,
    dim_cap: usize,
) -> Result<SeparableHamiltonian, GwError> {
    if n < 1 {
        return Err(GwError::invalid("n must be ≥ 1"));
    }
    if !(mass > 0.0) {
        return Err(GwError::invalid("mass must be positive"));
    }
    let reg = BosonRegister::from_levels(lambda, half_width)?;
    let bosons = n + 1;
    let mut dim: usize = 1;
    for _ in 0..bosons {
        dim = dim
            .checked_mul(lambda)
            .ok_or(GwError::DimCapExceeded {
                dim: usize::MAX,
                cap: dim_cap,
            })?;
    }
    if dim > dim_cap {
        return Err(GwError::DimCapExceeded { dim, cap: dim_cap });
    }
    let basis = ProductBasis::uniform(reg.clone(), bosons)?;
    let pref = mass * mass / 8.0;
    let potential = basis.evaluate_on_grid(|xs| {
        let s: f64 = xs.iter().map(|x| x * x).sum();
        let d = s - 1.0;
        pref * d * d
    });
    let pauli_form = match reg.qubit_count() {
        Some(q) if (q as usize) * bosons <= 32 => {
            let regs = vec![reg; bosons];
            Some(
                crate::pauli::expand_polynomial_potential(&regs, 1.0, 2)?
                    .scaled(Complex64::new(pref, 0.0)),
            )
        }
        _ => None,
    };
    SeparableHamiltonian::new(basis, vec![0.5; bosons], potential, pauli_form)
}

/// Two-boson ξ ancilla Hamiltonian, ½(p²_ξR + p²_ξI) + (m²/8)(ξR² + ξI² − 1)².
/// Structurally identical to `build_sn(1, …)`.
pub fn build_xi_u1(
    mass: f64,
    half_width: f64,
    lambda: usize,
    dim_cap: usize,
) -> Result<SeparableHamiltonian, GwError> {
    build_sn(1, mass, half_width, lambda, dim_cap)
}

/// Gauge group flavor for generator bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeGroup {
    U,
    SU,
}

/// Orthonormal Hermitian generator basis, Tr(τ_α τ_β) = δ_αβ.
pub struct GeneratorSet {
    n: usize,
    group: GaugeGroup,
    matrices: Vec<DMatrix<Complex64>>,
}

impl GeneratorSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn group(&self) -> GaugeGroup {
        self.group
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    /// Σ_α (τ^α τ^α), the quadratic Casimir matrix.
    pub fn sum_tau_tau(&self) -> DMatrix<Complex64> {
        let mut acc = DMatrix::<Complex64>::zeros(self.n, self.n);
        for t in &self.matrices {
            acc += t * t;
        }
        acc
    }

    /// Largest violation of Tr(τ_α τ_β) = δ_αβ.
    pub fn trace_orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, ta) in self.matrices.iter().enumerate() {
            for (b, tb) in self.matrices.iter().enumerate() {
                let tr: Complex64 = (ta * tb).trace();
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((tr - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Largest violation of the Fierz completeness identity:
    /// Σ_α τ^α_{pq} τ^α_{rs} = δ_ps δ_qr (U) or δ_ps δ_qr − δ_pq δ_rs/N (SU).
    pub fn fierz_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut acc = Complex64::ZERO;
                        for t in &self.matrices {
                            acc += t[(p, q)] * t[(r, s)];
                        }
                        let mut expect = if p == s && q == r { 1.0 } else { 0.0 };
                        if self.group == GaugeGroup::SU && p == q && r == s {
                            expect -= 1.0 / n as f64;
                        }
                        worst = worst.max((acc - Complex64::new(expect, 0.0)).norm());
                    }
                }
            }
        }
        worst
    }

    /// Structure constants f_{αβγ} = −i·Tr([τ_α, τ_β] τ_γ).
    pub fn structure_constants(&self) -> Vec<Vec<Vec<Complex64>>> {
        let k = self.count();
        let mut f = vec![vec![vec![Complex64::ZERO; k]; k]; k];
        for a in 0..k {
            for b in 0..k {
                let comm = &self.matrices[a] * &self.matrices[b]
                    - &self.matrices[b] * &self.matrices[a];
                for (g, tg) in self.matrices.iter().enumerate() {
                    f[a][b][g] = -Complex64::i() * (&comm * tg).trace();
                }
            }
        }
        f
    }
}

/// Gell-Mann-type generator basis rescaled to Tr(τ_α τ_β) = δ_αβ.
pub fn generator_set(n: usize, group: GaugeGroup) -> Result<GeneratorSet, GwError> {
    let min = match group {
        GaugeGroup::U => 1,
        GaugeGroup::SU => 2,
    };
    if n < min {
        return Err(GwError::invalid(format!("N must be ≥ {min} for {group:?}(N)")));
    }
    let mut mats = Vec::new();
    let zero = DMatrix::<Complex64>::zeros(n, n);
    // off-diagonal pairs
    for p in 0..n {
        for q in (p + 1)..n {
            let mut sym = zero.clone();
            sym[(p, q)] = Complex64::new(SQRT_HALF, 0.0);
            sym[(q, p)] = Complex64::new(SQRT_HALF, 0.0);
            mats.push(sym);
            let mut asym = zero.clone();
            asym[(p, q)] = Complex64::new(0.0, -SQRT_HALF);
            asym[(q, p)] = Complex64::new(0.0, SQRT_HALF);
            mats.push(asym);
        }
    }
    // traceless diagonals
    for l in 1..n {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut d = zero.clone();
        for i in 0..l {
            d[(i, i)] = Complex64::new(norm, 0.0);
        }
        d[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        mats.push(d);
    }
    if group == GaugeGroup::U {
        let mut id = zero;
        let norm = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            id[(i, i)] = Complex64::new(norm, 0.0);
        }
        mats.push(id);
    }
    Ok(GeneratorSet {
        n,
        group,
        matrices: mats,
    })
}

/// Builds the SU(2) embedding matrix [[α, −β*], [β, α*]]; unitary exactly on
/// the unit 3-sphere |α|² + |β|² = 1, where the determinant is 1.
pub fn su2_embedding_check(alpha: Complex64, beta: Complex64) -> (DMatrix<Complex64>, bool) {
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = alpha;
    m[(0, 1)] = -beta.conj();
    m[(1, 0)] = beta;
    m[(1, 1)] = alpha.conj();
    let r2 = alpha.norm_sqr() + beta.norm_sqr();
    (m, (r2 - 1.0).abs() < 1e-10)
}

/// Orbifold lattice description: complex N×N link variables on a periodic
/// d-dimensional lattice, each boson truncated to Q qubits.
#[derive(Debug, Clone)]
pub struct OrbifoldLatticeSpec {
    /// Gauge group size N.
    pub n: usize,
    /// Spatial dimensions d.
    pub dims: usize,
    /// Periodic extents, one per dimension.
    pub shape: Vec<usize>,
    /// Qubits per boson.
    pub qubits: u32,
    /// Lattice spacing a.
    pub a: f64,
    /// Coupling g.
    pub g: f64,
    /// Scalar mass m.
    pub m: f64,
    /// U(1) mass m_U(1).
    pub m_u1: f64,
    /// Grid half-width R.
    pub r: f64,
}

impl OrbifoldLatticeSpec {
    /// Defaults g = a = 1, the strong-coupling normalization used for the
    /// single-link studies.
    pub fn new(n: usize, dims: usize, shape: Vec<usize>, qubits: u32) -> Result<Self, GwError> {
        let spec = OrbifoldLatticeSpec {
            n,
            dims,
            shape,
            qubits,
            a: 1.0,
            g: 1.0,
            m: 1.0,
            m_u1: 1.0,
            r: 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GwError> {
        if self.n < 1 {
            return Err(GwError::invalid("N must be ≥ 1"));
        }
        if self.dims < 1 || self.shape.len() != self.dims {
            return Err(GwError::invalid("shape must list one extent per dimension"));
        }
        if self.shape.iter().any(|e| *e < 1) {
            return Err(GwError::invalid("extents must be ≥ 1"));
        }
        if self.qubits == 0 {
            return Err(GwError::invalid("qubit count must be ≥ 1"));
        }
        for (name, v) in [
            ("a", self.a),
            ("g", self.g),
            ("m", self.m),
            ("m_U(1)", self.m_u1),
            ("R", self.r),
        ] {
            if !(v > 0.0) {
                return Err(GwError::invalid(format!("coupling {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Lattice volume V.
    pub fn volume(&self) -> usize {
        self.shape.iter().product()
    }

    /// Number of links, d·V.
    pub fn n_links(&self) -> usize {
        self.dims * self.volume()
    }

    /// Real bosons: 2N² per link.
    pub fn n_bosons(&self) -> usize {
        2 * self.n * self.n * self.n_links()
    }

    /// Total qubits 2dN²VQ.
    pub fn total_qubits(&self) -> usize {
        self.n_bosons() * self.qubits as usize
    }

    fn site_index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (c, e) in coords.iter().zip(&self.shape) {
            idx += c * stride;
            stride *= e;
        }
        idx
    }

    fn site_coords(&self, mut idx: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|e| {
                let c = idx % e;
                idx /= e;
                c
            })
            .collect()
    }

    fn neighbor(&self, site: usize, dir: usize, step: isize) -> usize {
        let mut coords = self.site_coords(site);
        let e = self.shape[dir] as isize;
        coords[dir] = ((coords[dir] as isize + step).rem_euclid(e)) as usize;
        self.site_index(&coords)
    }

    fn link_index(&self, site: usize, dir: usize) -> usize {
        site * self.dims + dir
    }

    /// Qubit offset of one real boson: link (site, dir), matrix entry (p, q),
    /// component 0 = real (x), 1 = imaginary (y).
    fn boson_offset(&self, link: usize, p: usize, q: usize, comp: usize) -> usize {
        (((link * self.n + p) * self.n + q) * 2 + comp) * self.qubits as usize
    }
}

/// Matrix with operator-valued (PauliSum) entries.
struct OpMatrix {
    n: usize,
    e: Vec<PauliSum>,
}

impl OpMatrix {
    fn at(&self, p: usize, q: usize) -> &PauliSum {
        &self.e[p * self.n + q]
    }

    fn mul(&self, other: &OpMatrix) -> Result<OpMatrix, GwError> {
        let n = self.n;
        let mut e = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let mut acc = PauliSum::zero(self.e[0].qubit_count());
                for r in 0..n {
                    acc = acc.plus(&multiply(self.at(p, r), other.at(r, q))?)?;
                }
                e.push(acc);
            }
        }
        Ok(OpMatrix { n, e })
    }

    fn adjoint(&self) -> OpMatrix {
        let n = self.n;
        let mut e = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                e.push(self.at(q, p).adjoint());
            }
        }
        OpMatrix { n, e }
    }

    fn add(&self, other: &OpMatrix) -> Result<OpMatrix, GwError> {
        let e = self
            .e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| a.plus(b))
            .collect::<Result<_, _>>()?;
        Ok(OpMatrix { n: self.n, e })
    }

    fn sub(&self, other: &OpMatrix) -> Result<OpMatrix, GwError> {
        let e = self
            .e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| a.minus(b))
            .collect::<Result<_, _>>()?;
        Ok(OpMatrix { n: self.n, e })
    }

    fn sub_scalar(&self, c: Complex64) -> Result<OpMatrix, GwError> {
        let mut e = self.e.clone();
        let qc = self.e[0].qubit_count();
        for p in 0..self.n {
            e[p * self.n + p] = e[p * self.n + p].minus(&PauliSum::identity(qc, c))?;
        }
        Ok(OpMatrix { n: self.n, e })
    }

    fn trace(&self) -> Result<PauliSum, GwError> {
        let mut acc = PauliSum::zero(self.e[0].qubit_count());
        for p in 0..self.n {
            acc = acc.plus(self.at(p, p))?;
        }
        Ok(acc)
    }

    /// Tr(A·B) without forming the full product matrix.
    fn trace_product(&self, other: &OpMatrix) -> Result<PauliSum, GwError> {
        let mut acc = PauliSum::zero(self.e[0].qubit_count());
        for p in 0..self.n {
            for r in 0..self.n {
                acc = acc.plus(&multiply(self.at(p, r), other.at(r, p))?)?;
            }
        }
        Ok(acc)
    }
}

/// Hermitian orbifold Hamiltonian compiled to Pauli strings, split by term
/// category. The kinetic sum is all-Z in the momentum representation; every
/// other category is all-Z in the coordinate representation.
pub struct OrbifoldPauli {
    pub qubit_count: usize,
    /// Tr P P̄ summed over links.
    pub kinetic: PauliSum,
    /// (g²/2a³)·Tr|Σ_j (Z_j Z̄_j − Z̄_{j−ĵ} Z_{j−ĵ})|² summed over sites.
    pub electric: PauliSum,
    /// (2g²/a³)·Tr|Z_j Z_{k,+ĵ} − Z_k Z_{j,+k̂}|² over sites and j<k.
    pub plaquette: PauliSum,
    /// (m²g²/2a)·Tr|Z Z̄ − a/(2g²)|² over links.
    pub mass_su: PauliSum,
    /// (m²_U(1)·a/2g²)·|(a/2g²)^{−N/2} det Z − 1|² over links.
    pub mass_u1: PauliSum,
}

impl OrbifoldPauli {
    /// Per-category term counts: (name, count).
    pub fn term_counts(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("kinetic", self.kinetic.term_count()),
            ("electric", self.electric.term_count()),
            ("plaquette", self.plaquette.term_count()),
            ("mass_su", self.mass_su.term_count()),
            ("mass_u1", self.mass_u1.term_count()),
        ]
    }

    /// Terms in the quartic interaction categories (electric, plaquette,
    /// scalar mass), the O(N⁴Q⁴V) part of the gate count.
    pub fn quartic_term_count(&self) -> usize {
        self.electric.term_count() + self.plaquette.term_count() + self.mass_su.term_count()
    }

    /// Coordinate-representation potential: everything except the kinetic sum.
    pub fn potential_total(&self) -> Result<PauliSum, GwError> {
        self.electric
            .plus(&self.plaquette)?
            .plus(&self.mass_su)?
            .plus(&self.mass_u1)
    }
}

/// Compile the orbifold lattice Hamiltonian into Pauli-string categories.
///
/// `qubit_cap` bounds the symbolic expansion size (diagonalization is not
/// implied). The determinant mass term is expanded by a Leibniz sum over
/// permutations and is supported for N ≤ 3.
pub fn build_orbifold_pauli(
    spec: &OrbifoldLatticeSpec,
    qubit_cap: usize,
) -> Result<OrbifoldPauli, GwError> {
    spec.validate()?;
    let total = spec.total_qubits();
    if total > qubit_cap {
        return Err(GwError::DimCapExceeded {
            dim: total,
            cap: qubit_cap,
        });
    }
    if spec.n > 3 {
        return Err(GwError::invalid(
            "determinant mass term expanded symbolically only for N ≤ 3",
        ));
    }
    let reg = BosonRegister::from_qubits(spec.qubits, spec.r)?;
    let qn = spec.qubits as usize;
    let n = spec.n;
    let c_w = spec.a / (2.0 * spec.g * spec.g);

    // Ẑ and P̂ matrices per link. Entry (p,q) = (x̂ + iŷ)/√2 with x, y the
    // real bosons of that entry; P̂ uses the momentum expansions.
    let z_of = |link: usize| -> Result<OpMatrix, GwError> {
        let mut e = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let x = x_pauli(&reg, spec.boson_offset(link, p, q, 0), total)?;
                let y = x_pauli(&reg, spec.boson_offset(link, p, q, 1), total)?;
                e.push(
                    x.scaled(Complex64::new(SQRT_HALF, 0.0))
                        .plus(&y.scaled(Complex64::new(0.0, SQRT_HALF)))?,
                );
            }
        }
        Ok(OpMatrix { n, e })
    };
    let p_of = |link: usize| -> Result<OpMatrix, GwError> {
        let mut e = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let px = p_pauli(&reg, spec.boson_offset(link, p, q, 0), total)?;
                let py = p_pauli(&reg, spec.boson_offset(link, p, q, 1), total)?;
                e.push(
                    px.scaled(Complex64::new(SQRT_HALF, 0.0))
                        .plus(&py.scaled(Complex64::new(0.0, SQRT_HALF)))?,
                );
            }
        }
        Ok(OpMatrix { n, e })
    };

    let volume = spec.volume();
    let mut kinetic = PauliSum::zero(total);
    let mut electric = PauliSum::zero(total);
    let mut plaquette = PauliSum::zero(total);
    let mut mass_su = PauliSum::zero(total);
    let mut mass_u1 = PauliSum::zero(total);

    for site in 0..volume {
        // site divergence Σ_j (Z_j,n Z̄_j,n − Z̄_{j,n−ĵ} Z_{j,n−ĵ})
        let mut div: Option<OpMatrix> = None;
        for j in 0..spec.dims {
            let here = z_of(spec.link_index(site, j))?;
            let back = z_of(spec.link_index(spec.neighbor(site, j, -1), j))?;
            let term = here.mul(&here.adjoint())?.sub(&back.adjoint().mul(&back)?)?;
            div = Some(match div {
                None => term,
                Some(acc) => acc.add(&term)?,
            });
        }
        let div = div.expect("dims ≥ 1");
        let coeff = spec.g * spec.g / (2.0 * spec.a.powi(3));
        electric = electric.plus(
            &div.trace_product(&div.adjoint())?
                .scaled(Complex64::new(coeff, 0.0)),
        )?;

        // plaquette commutators for j < k
        for j in 0..spec.dims {
            for k in (j + 1)..spec.dims {
                let zj = z_of(spec.link_index(site, j))?;
                let zk_fwd = z_of(spec.link_index(spec.neighbor(site, j, 1), k))?;
                let zk = z_of(spec.link_index(site, k))?;
                let zj_fwd = z_of(spec.link_index(spec.neighbor(site, k, 1), j))?;
                let a = zj.mul(&zk_fwd)?.sub(&zk.mul(&zj_fwd)?)?;
                let coeff = 2.0 * spec.g * spec.g / spec.a.powi(3);
                plaquette = plaquette.plus(
                    &a.trace_product(&a.adjoint())?
                        .scaled(Complex64::new(coeff, 0.0)),
                )?;
            }
        }
    }

    for link in 0..spec.n_links() {
        let z = z_of(link)?;
        let p = p_of(link)?;
        kinetic = kinetic.plus(&p.trace_product(&p.adjoint())?)?;

        let w = z.mul(&z.adjoint())?.sub_scalar(Complex64::new(c_w, 0.0))?;
        let coeff = spec.m * spec.m * spec.g * spec.g / (2.0 * spec.a);
        mass_su = mass_su.plus(
            &w.trace_product(&w.adjoint())?
                .scaled(Complex64::new(coeff, 0.0)),
        )?;

        let det = determinant(&z)?;
        let d = det
            .scaled(Complex64::new(c_w.powf(-(n as f64) / 2.0), 0.0))
            .minus(&PauliSum::identity(total, Complex64::ONE))?;
        let coeff = spec.m_u1 * spec.m_u1 * spec.a / (2.0 * spec.g * spec.g);
        mass_u1 = mass_u1.plus(
            &multiply(&d, &d.adjoint())?.scaled(Complex64::new(coeff, 0.0)),
        )?;
    }

    Ok(OrbifoldPauli {
        qubit_count: total,
        kinetic,
        electric,
        plaquette,
        mass_su,
        mass_u1,
    })
}

/// Leibniz determinant of an operator matrix (entries commute).
fn determinant(m: &OpMatrix) -> Result<PauliSum, GwError> {
    let n = m.n;
    let qc = m.e[0].qubit_count();
    let mut acc = PauliSum::zero(qc);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let sign = permutation_sign(&perm);
        let mut prod = PauliSum::identity(qc, Complex64::new(sign, 0.0));
        for (row, col) in perm.iter().enumerate() {
            prod = multiply(&prod, m.at(row, *col))?;
        }
        acc = acc.plus(&prod)?;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(acc)
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Wilson loop operator mode.
#[derive(Debug, Clone)]
pub enum WilsonMode {
    /// Tr(Ẑ…Ẑ) along the path.
    Singlet,
    /// N^l·Ẑ_{a₁a₂}…Ẑ_{a_l a₁} with fixed color indices.
    NonSinglet { colors: Vec<usize> },
}

/// Compiled Wilson loop with its pre-collection term count.
pub struct WilsonLoop {
    pub pauli: PauliSum,
    /// Raw term count before collection: (2NQ)^l singlet, (2Q)^l non-singlet.
    pub raw_term_count: u128,
}

/// Compile a closed Wilson loop along forward lattice steps.
///
/// `directions[i]` is the direction of the i-th step; the path must return
/// to `start_site` modulo the periodic extents.
pub fn wilson_loop_pauli(
    spec: &OrbifoldLatticeSpec,
    start_site: &[usize],
    directions: &[usize],
    mode: &WilsonMode,
) -> Result<WilsonLoop, GwError> {
    spec.validate()?;
    if directions.is_empty() {
        return Err(GwError::invalid("loop length must be ≥ 1"));
    }
    if start_site.len() != spec.dims {
        return Err(GwError::invalid("start site must have one coordinate per dimension"));
    }
    if directions.iter().any(|d| *d >= spec.dims) {
        return Err(GwError::invalid("direction out of range"));
    }
    // closure check
    let mut disp = vec![0usize; spec.dims];
    for d in directions {
        disp[*d] += 1;
    }
    if disp
        .iter()
        .zip(&spec.shape)
        .any(|(steps, extent)| steps % extent != 0)
    {
        return Err(GwError::invalid("open path passed as closed loop"));
    }

    let reg = BosonRegister::from_qubits(spec.qubits, spec.r)?;
    let total = spec.total_qubits();
    let n = spec.n;
    let l = directions.len();
    let two_q = 2u128 * spec.qubits as u128;

    let entry = |link: usize, p: usize, q: usize| -> Result<PauliSum, GwError> {
        let x = x_pauli(&reg, spec.boson_offset(link, p, q, 0), total)?;
        let y = x_pauli(&reg, spec.boson_offset(link, p, q, 1), total)?;
        x.scaled(Complex64::new(SQRT_HALF, 0.0))
            .plus(&y.scaled(Complex64::new(0.0, SQRT_HALF)))
    };

    // collect links along the walk
    let mut site = spec.site_index(start_site);
    let mut links = Vec::with_capacity(l);
    for dir in directions {
        links.push(spec.link_index(site, *dir));
        site = spec.neighbor(site, *dir, 1);
    }

    match mode {
        WilsonMode::Singlet => {
            let mut prod: Option<OpMatrix> = None;
            for link in &links {
                let mut e = Vec::with_capacity(n * n);
                for p in 0..n {
                    for q in 0..n {
                        e.push(entry(*link, p, q)?);
                    }
                }
                let m = OpMatrix { n, e };
                prod = Some(match prod {
                    None => m,
                    Some(acc) => acc.mul(&m)?,
                });
            }
            let pauli = prod.expect("l ≥ 1").trace()?;
            Ok(WilsonLoop {
                pauli,
                raw_term_count: (n as u128).pow(l as u32) * two_q.pow(l as u32),
            })
        }
        WilsonMode::NonSinglet { colors } => {
            if colors.len() != l || colors.iter().any(|c| *c >= n) {
                return Err(GwError::invalid(
                    "non-singlet mode needs one color index per step, each < N",
                ));
            }
            let mut prod = PauliSum::identity(total, Complex64::new((n as f64).powi(l as i32), 0.0));
            for (i, link) in links.iter().enumerate() {
                let a = colors[i];
                let b = colors[(i + 1) % l];
                prod = multiply(&prod, &entry(*link, a, b)?)?;
            }
            Ok(WilsonLoop {
                pauli: prod,
                raw_term_count: two_q.pow(l as u32),
            })
        }
    }
}
