//! Weighted Pauli-string algebra and σ_z expansions of grid operators.
//!
//! Letters are packed two bits per qubit as an (X, Z) bitmask pair:
//! (0,0) = I, (1,0) = X, (0,1) = Z, (1,1) = Y. Quartic potential expansions
//! at Q = 5 with four bosons reach ~10⁵ terms, so terms stay packed and
//! collection works by sorting on the packed masks.

use num_complex::Complex64;

use crate::error::GwError;
use crate::kernels;
use crate::qgrid::BosonRegister;

fn words(qubit_count: usize) -> usize {
    qubit_count.div_ceil(64)
}

/// Exact i^e; `powi` on complex numbers goes through polar form and leaves
/// 1e−17 residues that would defeat exact-zero cancellation in `collect`.
fn i_power(e: u32) -> Complex64 {
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Packed Pauli letters over a fixed qubit count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliLetters {
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliLetters {
    fn identity(qubit_count: usize) -> Self {
        let w = words(qubit_count);
        PauliLetters {
            x: vec![0; w],
            z: vec![0; w],
        }
    }

    fn set_z(&mut self, qubit: usize) {
        self.z[qubit / 64] |= 1 << (qubit % 64);
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|w| *w == 0) && self.z.iter().all(|w| *w == 0)
    }

    /// True when every letter is I or Z (the operator is diagonal).
    pub fn is_all_z(&self) -> bool {
        self.x.iter().all(|w| *w == 0)
    }

    fn letter(&self, qubit: usize) -> char {
        let xb = (self.x[qubit / 64] >> (qubit % 64)) & 1;
        let zb = (self.z[qubit / 64] >> (qubit % 64)) & 1;
        match (xb, zb) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, 1) => 'Z',
            _ => 'Y',
        }
    }

    fn cmp_packed(&self, other: &Self) -> std::cmp::Ordering {
        self.z
            .iter()
            .zip(&other.z)
            .chain(self.x.iter().zip(&other.x))
            .map(|(a, b)| a.cmp(b))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// One weighted Pauli string.
#[derive(Debug, Clone)]
pub struct PauliTerm {
    pub coefficient: Complex64,
    pub letters: PauliLetters,
}

impl PauliTerm {
    /// Letters as a text string, qubit 0 leftmost.
    pub fn letters_string(&self, qubit_count: usize) -> String {
        (0..qubit_count).map(|q| self.letters.letter(q)).collect()
    }
}

/// A weighted sum of Pauli strings on a fixed qubit count.
#[derive(Debug, Clone)]
pub struct PauliSum {
    qubit_count: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    /// The zero operator.
    pub fn zero(qubit_count: usize) -> Self {
        PauliSum {
            qubit_count,
            terms: Vec::new(),
        }
    }

    /// c·Identity.
    pub fn identity(qubit_count: usize, coefficient: Complex64) -> Self {
        PauliSum {
            qubit_count,
            terms: vec![PauliTerm {
                coefficient,
                letters: PauliLetters::identity(qubit_count),
            }],
        }
        .collect()
    }

    /// c·Z on a single qubit.
    pub fn single_z(qubit_count: usize, qubit: usize, coefficient: Complex64) -> Self {
        let mut letters = PauliLetters::identity(qubit_count);
        letters.set_z(qubit);
        PauliSum {
            qubit_count,
            terms: vec![PauliTerm {
                coefficient,
                letters,
            }],
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Number of terms that are pure Z-strings of weight ≥ 1.
    pub fn rotation_count(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| t.letters.is_all_z() && !t.letters.is_identity())
            .count()
    }

    pub fn is_all_z(&self) -> bool {
        self.terms.iter().all(|t| t.letters.is_all_z())
    }

    /// Canonical form: sort on packed letters, merge duplicates, drop exact
    /// zeros. Idempotent.
    pub fn collect(mut self) -> Self {
        self.terms.sort_by(|a, b| a.letters.cmp_packed(&b.letters));
        let mut out: Vec<PauliTerm> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.letters == term.letters => {
                    last.coefficient += term.coefficient;
                }
                _ => out.push(term),
            }
        }
        out.retain(|t| t.coefficient.re != 0.0 || t.coefficient.im != 0.0);
        PauliSum {
            qubit_count: self.qubit_count,
            terms: out,
        }
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for t in &mut self.terms {
            t.coefficient *= factor;
        }
        self.collect()
    }

    pub fn plus(&self, other: &PauliSum) -> Result<PauliSum, GwError> {
        self.check_width(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(PauliSum {
            qubit_count: self.qubit_count,
            terms,
        }
        .collect())
    }

    pub fn minus(&self, other: &PauliSum) -> Result<PauliSum, GwError> {
        self.plus(&other.clone().scaled(-Complex64::ONE))
    }

    /// Conjugate transpose. Every Pauli string is Hermitian, so this only
    /// conjugates the coefficients.
    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            qubit_count: self.qubit_count,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm {
                    coefficient: t.coefficient.conj(),
                    letters: t.letters.clone(),
                })
                .collect(),
        }
        .collect()
    }

    /// Largest imaginary part among collected coefficients; zero for a
    /// Hermitian sum.
    pub fn max_imag_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient.im.abs())
            .fold(0.0, f64::max)
    }

    fn check_width(&self, other: &PauliSum) -> Result<(), GwError> {
        if self.qubit_count != other.qubit_count {
            return Err(GwError::QubitCountMismatch {
                left: self.qubit_count,
                right: other.qubit_count,
            });
        }
        Ok(())
    }

    /// Diagonal of an all-Z sum, indexed by the little-endian basis integer.
    pub fn diagonal(&self) -> Result<Vec<Complex64>, GwError> {
        if !self.is_all_z() {
            return Err(GwError::invalid("diagonal requires an all-Z Pauli sum"));
        }
        if self.qubit_count > 30 {
            return Err(GwError::invalid(format!(
                "diagonal extraction gated to ≤ 30 qubits, got {}",
                self.qubit_count
            )));
        }
        let dim = 1usize << self.qubit_count;
        let zmasks: Vec<(u64, Complex64)> = self
            .terms
            .iter()
            .map(|t| (t.letters.z[0], t.coefficient))
            .collect();
        let mut out = vec![Complex64::ZERO; dim];
        kernels::map_inplace(&mut out, |idx, v| {
            let mut acc = Complex64::ZERO;
            for (z, c) in &zmasks {
                // σ_z eigenvalue is +1 on |0⟩, −1 on |1⟩
                let sign = if ((z & idx as u64).count_ones() & 1) == 1 {
                    -1.0
                } else {
                    1.0
                };
                acc += c * sign;
            }
            *v = acc;
        });
        Ok(out)
    }

    /// Apply the sum to a dense state vector (little-endian basis order).
    pub fn apply_dense(&self, state: &[Complex64]) -> Result<Vec<Complex64>, GwError> {
        if self.qubit_count > 30 {
            return Err(GwError::invalid("dense application gated to ≤ 30 qubits"));
        }
        let dim = 1usize << self.qubit_count;
        if state.len() != dim {
            return Err(GwError::invalid("state length does not match qubit count"));
        }
        let mut out = vec![Complex64::ZERO; dim];
        for t in &self.terms {
            let x = t.letters.x[0];
            let z = t.letters.z[0];
            // U = i^{|x∧z|} X^x Z^z acting on |b⟩ gives
            // i^{|x∧z|} (−1)^{|z∧b|} |b⊕x⟩.
            let base_phase = i_power((x & z).count_ones());
            for (b, amp) in state.iter().enumerate() {
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let sign = if ((z & b as u64).count_ones() & 1) == 1 {
                    -1.0
                } else {
                    1.0
                };
                out[b ^ x as usize] += t.coefficient * base_phase * sign * amp;
            }
        }
        Ok(out)
    }

    /// Dense matrix form as a list of columns.
    pub fn to_dense(&self) -> Result<Vec<Vec<Complex64>>, GwError> {
        if self.qubit_count > 12 {
            return Err(GwError::invalid("dense form gated to ≤ 12 qubits"));
        }
        let dim = 1usize << self.qubit_count;
        let mut cols = Vec::with_capacity(dim);
        for b in 0..dim {
            let mut e = vec![Complex64::ZERO; dim];
            e[b] = Complex64::ONE;
            cols.push(self.apply_dense(&e)?);
        }
        Ok(cols)
    }

    /// Serialize as `coeff_re coeff_im letters` lines, qubit 0 leftmost.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            s.push_str(&format!(
                "{} {} {}\n",
                t.coefficient.re,
                t.coefficient.im,
                t.letters_string(self.qubit_count)
            ));
        }
        s
    }

    /// Parse the `to_lines` format.
    pub fn from_lines(text: &str) -> Result<PauliSum, GwError> {
        let mut terms = Vec::new();
        let mut qubit_count = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (re, im, letters) = (
                it.next()
                    .ok_or_else(|| GwError::invalid("missing coeff_re"))?,
                it.next()
                    .ok_or_else(|| GwError::invalid("missing coeff_im"))?,
                it.next().ok_or_else(|| GwError::invalid("missing letters"))?,
            );
            let re: f64 = re
                .parse()
                .map_err(|_| GwError::invalid(format!("bad coefficient {re}")))?;
            let im: f64 = im
                .parse()
                .map_err(|_| GwError::invalid(format!("bad coefficient {im}")))?;
            let n = letters.chars().count();
            match qubit_count {
                None => qubit_count = Some(n),
                Some(q) if q != n => {
                    return Err(GwError::invalid("inconsistent letter lengths"));
                }
                _ => {}
            }
            let mut packed = PauliLetters::identity(n);
            for (q, ch) in letters.chars().enumerate() {
                match ch {
                    'I' => {}
                    'X' => packed.x[q / 64] |= 1 << (q % 64),
                    'Z' => packed.z[q / 64] |= 1 << (q % 64),
                    'Y' => {
                        packed.x[q / 64] |= 1 << (q % 64);
                        packed.z[q / 64] |= 1 << (q % 64);
                    }
                    _ => return Err(GwError::invalid(format!("bad Pauli letter {ch}"))),
                }
            }
            terms.push(PauliTerm {
                coefficient: Complex64::new(re, im),
                letters: packed,
            });
        }
        let qubit_count = qubit_count.ok_or_else(|| GwError::invalid("no Pauli terms in input"))?;
        Ok(PauliSum { qubit_count, terms }.collect())
    }
}

/// Distributive product with single-qubit multiplication rules and phase
/// tracking. Parallelizes over left-hand terms with a deterministic merge.
pub fn multiply(a: &PauliSum, b: &PauliSum) -> Result<PauliSum, GwError> {
    a.check_width(b)?;
    let w = words(a.qubit_count);
    let products = kernels::chunked_partials(a.terms.len(), 64, |range| {
        let mut out = Vec::with_capacity(range.len() * b.terms.len());
        for ta in &a.terms[range] {
            for tb in &b.terms {
                let mut x3 = vec![0u64; w];
                let mut z3 = vec![0u64; w];
                // phase exponent: |x1∧z1| + |x2∧z2| + 2|z1∧x2| − |x3∧z3| mod 4
                let mut e: u32 = 0;
                for i in 0..w {
                    x3[i] = ta.letters.x[i] ^ tb.letters.x[i];
                    z3[i] = ta.letters.z[i] ^ tb.letters.z[i];
                    e = e.wrapping_add((ta.letters.x[i] & ta.letters.z[i]).count_ones());
                    e = e.wrapping_add((tb.letters.x[i] & tb.letters.z[i]).count_ones());
                    e = e.wrapping_add(2 * (ta.letters.z[i] & tb.letters.x[i]).count_ones());
                    e = e.wrapping_sub((x3[i] & z3[i]).count_ones());
                }
                out.push(PauliTerm {
                    coefficient: ta.coefficient * tb.coefficient * i_power(e),
                    letters: PauliLetters { x: x3, z: z3 },
                });
            }
        }
        out
    });
    let terms: Vec<PauliTerm> = products.into_iter().flatten().collect();
    Ok(PauliSum {
        qubit_count: a.qubit_count,
        terms,
    }
    .collect())
}

/// σ_z expansion of x̂ on one register: −δx·Σ_j 2^{j−1}·σ_{z,j}/2 placed at
/// `qubit_offset` inside an operator on `qubit_count` qubits.
pub fn x_pauli(
    reg: &BosonRegister,
    qubit_offset: usize,
    qubit_count: usize,
) -> Result<PauliSum, GwError> {
    weighted_z_expansion(reg, qubit_offset, qubit_count, reg.delta_x())
}

/// σ_z expansion of p̂, as `x_pauli` with δp in place of δx. Diagonal in the
/// momentum representation.
pub fn p_pauli(
    reg: &BosonRegister,
    qubit_offset: usize,
    qubit_count: usize,
) -> Result<PauliSum, GwError> {
    weighted_z_expansion(reg, qubit_offset, qubit_count, reg.delta_p())
}

fn weighted_z_expansion(
    reg: &BosonRegister,
    qubit_offset: usize,
    qubit_count: usize,
    spacing: f64,
) -> Result<PauliSum, GwError> {
    let q = reg.qubit_count().ok_or_else(|| {
        GwError::invalid(format!(
            "Pauli expansion needs a power-of-two level count, got {}",
            reg.levels()
        ))
    })? as usize;
    if qubit_offset + q > qubit_count {
        return Err(GwError::OffsetOutOfRange {
            offset: qubit_offset,
            width: q,
            qubit_count,
        });
    }
    let mut sum = PauliSum::zero(qubit_count);
    for j in 1..=q {
        let coeff = Complex64::new(-spacing * (1u64 << (j - 1)) as f64 / 2.0, 0.0);
        sum = sum.plus(&PauliSum::single_z(qubit_count, qubit_offset + j - 1, coeff))?;
    }
    Ok(sum)
}

/// All-Z expansion of (Σ_a x̂_a² − c)^k over registers of equal width,
/// k ∈ {1, 2}. Register `a` occupies qubits [a·Q, (a+1)·Q).
pub fn expand_polynomial_potential(
    registers: &[BosonRegister],
    c: f64,
    k: u32,
) -> Result<PauliSum, GwError> {
    if registers.is_empty() {
        return Err(GwError::invalid("need at least one register"));
    }
    if !(1..=2).contains(&k) {
        return Err(GwError::invalid(format!("unsupported exponent k={k}")));
    }
    let q = registers[0]
        .qubit_count()
        .ok_or_else(|| GwError::invalid("registers must have power-of-two levels"))?
        as usize;
    if registers.iter().any(|r| r.qubit_count() != Some(q as u32)) {
        return Err(GwError::invalid("registers must share the qubit count"));
    }
    let qubit_count = registers.len() * q;
    let mut base = PauliSum::identity(qubit_count, Complex64::new(-c, 0.0));
    for (a, reg) in registers.iter().enumerate() {
        let x = x_pauli(reg, a * q, qubit_count)?;
        base = base.plus(&multiply(&x, &x)?)?;
    }
    if k == 1 {
        Ok(base)
    } else {
        multiply(&base, &base)
    }
}

/// Per-Trotter-step gate counts for exponentiating a collected Pauli sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceReport {
    /// Z-rotations: one per non-identity Z-string.
    pub rotations: usize,
    /// CNOTs: 2·(weight − 1) per non-identity term (parity ladder).
    pub cnots: usize,
    /// Two-qubit gates for the Fourier-transform blocks: blocks·Q(Q+1)/2.
    pub dft_two_qubit_gates: usize,
    /// ASAP-schedule depth over disjoint-support term layers.
    pub parallel_depth: usize,
}

/// Count rotations, CNOTs, and DFT gates for one Trotter step of `h`
/// (collected), with `dft_blocks` Fourier blocks of `q_per_block` qubits.
pub fn resource_estimate(h: &PauliSum, dft_blocks: usize, q_per_block: usize) -> ResourceReport {
    let mut rotations = 0usize;
    let mut cnots = 0usize;
    let mut free_at = vec![0usize; h.qubit_count().max(1)];
    let mut depth = 0usize;
    for t in h.terms() {
        let w = t.letters.weight();
        if w == 0 {
            continue;
        }
        rotations += 1;
        cnots += 2 * (w - 1);
        // ladder cost: CNOT chain down, rotation, chain back
        let cost = 2 * (w - 1) + 1;
        let qubits: Vec<usize> = (0..h.qubit_count())
            .filter(|q| t.letters.letter(*q) != 'I')
            .collect();
        let start = qubits.iter().map(|q| free_at[*q]).max().unwrap_or(0);
        for q in qubits {
            free_at[q] = start + cost;
        }
        depth = depth.max(start + cost);
    }
    ResourceReport {
        rotations,
        cnots,
        dft_two_qubit_gates: dft_blocks * q_per_block * (q_per_block + 1) / 2,
        parallel_depth: depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgrid::coordinate_values;

    fn reg(q: u32, r: f64) -> BosonRegister {
        BosonRegister::from_qubits(q, r).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn x_pauli_q1_single_term() {
        let r = reg(1, 1.0);
        let s = x_pauli(&r, 0, 1).unwrap();
        assert_eq!(s.term_count(), 1);
        assert_eq!(s.terms()[0].letters_string(1), "Z");
        assert!((s.terms()[0].coefficient - c(-r.delta_x() / 2.0)).norm() < 1e-15);
        // acting on |0⟩: σ_z|0⟩ = +|0⟩ so the diagonal entry is −δx/2
        let diag = s.diagonal().unwrap();
        assert!((diag[0] - c(-r.delta_x() / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn x_pauli_diagonal_matches_codec_q2() {
        let r = reg(2, 2.0);
        let s = x_pauli(&r, 0, 2).unwrap();
        let diag = s.diagonal().unwrap();
        let xs = coordinate_values(&r);
        for (k, x) in xs.iter().enumerate() {
            assert!((diag[k] - c(*x)).norm() < 1e-14);
        }
    }

    #[test]
    fn x_pauli_q6_terms_and_max_coeff() {
        let r = reg(6, 2.0);
        let s = x_pauli(&r, 0, 6).unwrap();
        assert_eq!(s.term_count(), 6);
        let max = s
            .terms()
            .iter()
            .map(|t| t.coefficient.norm())
            .fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p_pauli_examples() {
        use std::f64::consts::PI;
        let s = p_pauli(&reg(1, PI), 0, 1).unwrap();
        assert_eq!(s.term_count(), 1);
        assert!((s.terms()[0].coefficient - c(-0.5)).norm() < 1e-15);

        let r2 = reg(2, 2.0);
        let s2 = p_pauli(&r2, 0, 2).unwrap();
        assert_eq!(s2.term_count(), 2);
        let mut mags: Vec<f64> = s2.terms().iter().map(|t| t.coefficient.norm()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mags[0] - r2.delta_p() / 2.0).abs() < 1e-15);
        assert!((mags[1] - r2.delta_p()).abs() < 1e-15);

        let r3 = reg(3, 2.0);
        let s3 = p_pauli(&r3, 0, 3).unwrap();
        let diag = s3.diagonal().unwrap();
        for (k, p) in crate::qgrid::momentum_values(&r3).iter().enumerate() {
            assert!((diag[k] - c(*p)).norm() < 1e-13);
        }
    }

    #[test]
    fn offset_out_of_range_rejected() {
        let r = reg(2, 1.0);
        assert!(matches!(
            x_pauli(&r, 3, 4),
            Err(GwError::OffsetOutOfRange { .. })
        ));
    }

    #[test]
    fn single_qubit_products() {
        let z = PauliSum::from_lines("1 0 Z").unwrap();
        let x = PauliSum::from_lines("1 0 X").unwrap();
        let y = PauliSum::from_lines("1 0 Y").unwrap();

        let zz = multiply(&z, &z).unwrap();
        assert_eq!(zz.term_count(), 1);
        assert!(zz.terms()[0].letters.is_identity());
        assert!((zz.terms()[0].coefficient - c(1.0)).norm() < 1e-15);

        let xy = multiply(&x, &y).unwrap();
        assert_eq!(xy.terms()[0].letters_string(1), "Z");
        assert!((xy.terms()[0].coefficient - Complex64::i()).norm() < 1e-15);

        let yx = multiply(&y, &x).unwrap();
        assert!((yx.terms()[0].coefficient + Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn x_squared_matches_dense_oracle() {
        // (x̂ for Q=2)² against the dense 4×4 product of the x̂ matrix.
        let r = reg(2, 2.0);
        let x = x_pauli(&r, 0, 2).unwrap();
        let xx = multiply(&x, &x).unwrap();
        let dense_x = x.to_dense().unwrap();
        let dense_xx = xx.to_dense().unwrap();
        let dim = 4;
        for col in 0..dim {
            for row in 0..dim {
                let mut expect = Complex64::ZERO;
                for mid in 0..dim {
                    expect += dense_x[mid][row] * dense_x[col][mid];
                }
                assert!((dense_xx[col][row] - expect).norm() < 1e-14);
            }
        }
        let diag = xx.diagonal().unwrap();
        for (k, x) in coordinate_values(&r).iter().enumerate() {
            assert!((diag[k] - c(x * x)).norm() < 1e-14);
        }
    }

    #[test]
    fn potential_q1_r1_constant_quarter() {
        let regs = vec![reg(1, 1.0), reg(1, 1.0)];
        let s = expand_polynomial_potential(&regs, 1.0, 2).unwrap();
        let diag = s.diagonal().unwrap();
        for v in diag {
            assert!((v - c(0.25)).norm() < 1e-14);
        }
    }

    /// Independent oracle: project a diagonal onto the Z-string basis by
    /// character orthogonality and count nonzero coefficients.
    fn z_string_count_oracle(diag: &[f64]) -> usize {
        let dim = diag.len();
        let mut count = 0;
        for s in 0..dim {
            let mut coeff = 0.0;
            for (idx, v) in diag.iter().enumerate() {
                let sign = if ((s & idx).count_ones() & 1) == 1 {
                    -1.0
                } else {
                    1.0
                };
                coeff += v * sign;
            }
            coeff /= dim as f64;
            if coeff.abs() > 1e-13 {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn potential_term_count_matches_z_basis_oracle() {
        // n=1 (two bosons), Q=2, k=2
        let r = reg(2, 2.0);
        let regs = vec![r.clone(), r.clone()];
        let s = expand_polynomial_potential(&regs, 1.0, 2).unwrap();
        let xs = coordinate_values(&r);
        let mut grid = vec![0.0; 16];
        for (idx, g) in grid.iter_mut().enumerate() {
            let (x, y) = (xs[idx & 3], xs[idx >> 2]);
            let v = x * x + y * y - 1.0;
            *g = v * v;
        }
        assert_eq!(s.term_count(), z_string_count_oracle(&grid));
        // and the diagonal itself matches the grid evaluation
        let diag = s.diagonal().unwrap();
        for (d, g) in diag.iter().zip(&grid) {
            assert!((d - c(*g)).norm() < 1e-13);
        }
    }

    #[test]
    fn potential_k1_c0_reduces_to_sum_of_squares() {
        let r = reg(2, 1.5);
        let regs = vec![r.clone(), r.clone(), r.clone()];
        let s = expand_polynomial_potential(&regs, 0.0, 1).unwrap();
        let mut expect = PauliSum::zero(6);
        for a in 0..3 {
            let x = x_pauli(&r, 2 * a, 6).unwrap();
            expect = expect.plus(&multiply(&x, &x).unwrap()).unwrap();
        }
        assert_eq!(s.term_count(), expect.term_count());
        for (a, b) in s.terms().iter().zip(expect.terms()) {
            assert_eq!(a.letters, b.letters);
            assert!((a.coefficient - b.coefficient).norm() < 1e-15);
        }
    }

    #[test]
    fn potential_diagonal_matches_grid_upto_3_bosons() {
        for (q, bosons) in [(3u32, 2usize), (2, 3), (4, 2)] {
            let r = reg(q, 2.0);
            let regs = vec![r.clone(); bosons];
            let s = expand_polynomial_potential(&regs, 1.0, 2).unwrap();
            assert!(s.is_all_z());
            assert!(s.max_imag_coefficient() < 1e-12);
            let diag = s.diagonal().unwrap();
            let xs = coordinate_values(&r);
            let lam = r.levels();
            for (idx, d) in diag.iter().enumerate() {
                let mut rest = idx;
                let mut ssq = 0.0;
                for _ in 0..bosons {
                    ssq += xs[rest % lam] * xs[rest % lam];
                    rest /= lam;
                }
                let v = ssq - 1.0;
                assert!(
                    (d - c(v * v)).norm() < 1e-12,
                    "Q={q} bosons={bosons} idx={idx}"
                );
            }
        }
    }

    #[test]
    fn collect_is_idempotent() {
        let r = reg(3, 2.0);
        let s = expand_polynomial_potential(&[r.clone(), r], 1.0, 2).unwrap();
        let once = s.clone().collect();
        let twice = once.clone().collect();
        assert_eq!(once.term_count(), twice.term_count());
        for (a, b) in once.terms().iter().zip(twice.terms()) {
            assert_eq!(a.letters, b.letters);
            assert_eq!(a.coefficient, b.coefficient);
        }
    }

    #[test]
    fn hermiticity_dense_small() {
        let r = reg(2, 2.0);
        let s = expand_polynomial_potential(&[r.clone(), r], 0.7, 2).unwrap();
        let dense = s.to_dense().unwrap();
        let dim = dense.len();
        for i in 0..dim {
            for j in 0..dim {
                assert!((dense[j][i] - dense[i][j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn resource_estimate_zz() {
        let h = PauliSum::from_lines("1 0 ZZ").unwrap();
        let rep = resource_estimate(&h, 0, 0);
        assert_eq!(rep.rotations, 1);
        assert_eq!(rep.cnots, 2);
        assert_eq!(rep.parallel_depth, 3);
    }

    #[test]
    fn resource_estimate_identity_only() {
        let h = PauliSum::identity(3, c(2.5));
        let rep = resource_estimate(&h, 2, 3);
        assert_eq!(rep.rotations, 0);
        assert_eq!(rep.cnots, 0);
        assert_eq!(rep.dft_two_qubit_gates, 2 * 3 * 4 / 2);
    }

    #[test]
    fn serialization_round_trip() {
        let r = reg(2, 2.0);
        let s = expand_polynomial_potential(&[r.clone(), r], 1.0, 2).unwrap();
        let text = s.to_lines();
        assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 3);
        let back = PauliSum::from_lines(&text).unwrap();
        assert_eq!(back.term_count(), s.term_count());
        for (a, b) in back.terms().iter().zip(s.terms()) {
            assert_eq!(a.letters, b.letters);
            assert!((a.coefficient - b.coefficient).norm() < 1e-12);
        }
    }

    #[test]
    fn quartic_count_scaling_fits_slope_four() {
        // term counts of (Σ_{a=1,2} x_a² − 1)² against Q on a log-log fit
        let mut lnq = Vec::new();
        let mut lnt = Vec::new();
        for q in 2..=5u32 {
            let r = reg(q, 2.0);
            let s = expand_polynomial_potential(&[r.clone(), r], 1.0, 2).unwrap();
            lnq.push((q as f64).ln());
            lnt.push((s.term_count() as f64).ln());
        }
        let n = lnq.len() as f64;
        let (sx, sy): (f64, f64) = (lnq.iter().sum(), lnt.iter().sum());
        let sxx: f64 = lnq.iter().map(|x| x * x).sum();
        let sxy: f64 = lnq.iter().zip(&lnt).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope - 4.0).abs() < 0.5,
            "expected ~Q⁴ growth, slope {slope}"
        );
    }
}
