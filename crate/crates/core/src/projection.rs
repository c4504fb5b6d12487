//! Gauge-singlet projection by Haar-weighted group averaging: the ancilla
//! weight state, the U(1)-link projection with ⟨Ĝ²⟩ diagnostics, and the
//! Z₂/Z_N toy protocols.
//!
//! The group sum runs over the ancilla grid with a fixed chunk order, so the
//! parallel reduction is bit-reproducible.

use num_complex::Complex64;

use crate::error::GwError;
use crate::kernels;
use crate::models::build_xi_u1;
use crate::qgrid::{BosonRegister, DftEngine, Direction, ProductBasis, Rep, StateVector};
use crate::spectrum::lanczos_with;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Parameters of the ξ ancilla register pair.
#[derive(Debug, Clone)]
pub struct GaugeAverageSpec {
    /// Ancilla mass m_ξ.
    pub mass: f64,
    /// Ancilla half-width R_ξ.
    pub half_width: f64,
    /// Ancilla truncation level Λ_ξ per boson (even).
    pub lambda: usize,
}

impl GaugeAverageSpec {
    pub fn new(mass: f64, half_width: f64, lambda: usize) -> Result<Self, GwError> {
        if !(mass > 0.0 && half_width > 0.0) {
            return Err(GwError::invalid("ancilla parameters must be positive"));
        }
        BosonRegister::from_levels(lambda, half_width)?;
        Ok(GaugeAverageSpec {
            mass,
            half_width,
            lambda,
        })
    }
}

/// Haar-approximating weights φ(ξ) over the ξ grid: the ground state of the
/// ξ Hamiltonian with the global phase fixed real positive at its peak.
pub struct GWeights {
    basis: ProductBasis,
    weights: Vec<f64>,
}

impl GWeights {
    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ξ value at a flat grid index, ξ = ξ_R + i·ξ_I.
    pub fn xi_at(&self, flat: usize) -> Complex64 {
        Complex64::new(
            self.basis.coordinate_at(flat, 0),
            self.basis.coordinate_at(flat, 1),
        )
    }
}

/// Ground state of the ξ Hamiltonian as group-averaging weights.
///
/// Reports an error if the ground state is quasi-degenerate (gap < 1e−8),
/// which would make the weights ill-defined.
pub fn build_g_state(spec: &GaugeAverageSpec) -> Result<GWeights, GwError> {
    let h = build_xi_u1(spec.mass, spec.half_width, spec.lambda, crate::DEFAULT_DIM_CAP)?;
    let sol = lanczos_with(
        &h,
        2,
        crate::spectrum::LanczosOptions {
            tol: 1e-10,
            ..Default::default()
        },
    )?;
    if sol.eigenvalues[1] - sol.eigenvalues[0] < 1e-8 {
        return Err(GwError::NonConvergence(format!(
            "ξ ground state is quasi-degenerate (gap {:.3e})",
            sol.eigenvalues[1] - sol.eigenvalues[0]
        )));
    }
    let mut weights = sol.eigenvectors.unwrap().swap_remove(0);
    // fix the global sign at the largest-magnitude amplitude
    let peak = weights
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if peak < 0.0 {
        kernels::map_inplace(&mut weights, |_, w| *w = -*w);
    }
    Ok(GWeights {
        basis: h.basis().clone(),
        weights,
    })
}

/// Two-boson U(1) link state rotated by ξ, in the momentum representation:
/// the plane wave exp(−i p·z^(ξ)) componentwise with z^(ξ) = ξ·z, which is
/// the exact shift unitary on the periodic grid. Normalized.
///
/// The complex label packs the two coordinates as z = (x + iy)/√2.
pub fn u1_rotate(z: Complex64, xi: Complex64, link_basis: &ProductBasis) -> StateVector {
    let target = xi * z;
    let (x, y) = (SQRT2 * target.re, SQRT2 * target.im);
    let rx = link_basis.register(0);
    let ry = link_basis.register(1);
    let lx = rx.levels();
    let ly = ry.levels();
    let scale = 1.0 / ((lx * ly) as f64).sqrt();
    let px: Vec<Complex64> = (0..lx)
        .map(|k| Complex64::from_polar(scale, -rx.momentum(k) * x))
        .collect();
    let py: Vec<Complex64> = (0..ly)
        .map(|k| Complex64::from_polar(1.0, -ry.momentum(k) * y))
        .collect();
    let mut amps = vec![Complex64::ZERO; link_basis.dim()];
    kernels::map_inplace(&mut amps, |flat, a| {
        *a = px[flat % lx] * py[flat / lx];
    });
    StateVector::from_parts(
        link_basis.clone(),
        vec![Rep::Momentum, Rep::Momentum],
        amps,
    )
}

/// Outcome of a U(1) singlet projection.
pub struct ProjectionResult {
    /// Projected state, coordinate representation, normalized when the norm
    /// is above threshold.
    pub projected: StateVector,
    /// ‖Σ_ξ φ(ξ)·T_ξ|z⟩‖ before renormalization (postselection amplitude).
    pub norm_before_normalization: f64,
    pub g2_before: f64,
    pub g2_after: f64,
    /// Set when the input was annihilated by the projection.
    pub annihilated: bool,
}

/// Haar-average a U(1) link state |z⟩ over the ξ grid and evaluate ⟨Ĝ²⟩
/// before and after.
///
/// The sum weights each grid point by |φ(ξ)|², the probability weight the
/// ancilla sandwich ⟨𝒢|T̂|𝒢⟩ attaches to ξ; with Σ|φ|² = 1 the average is a
/// contraction. The link grid shares the ancilla half-width; `lambda_link`
/// sets its truncation level.
pub fn project_u1(
    z: Complex64,
    spec: &GaugeAverageSpec,
    lambda_link: usize,
) -> Result<ProjectionResult, GwError> {
    let g = build_g_state(spec)?;
    let link_reg = BosonRegister::from_levels(lambda_link, spec.half_width)?;
    let link_basis = ProductBasis::uniform(link_reg, 2)?;
    let dim = link_basis.dim();

    // reject labels whose coordinates fall outside the grid
    let (x, y) = (SQRT2 * z.re, SQRT2 * z.im);
    let r = spec.half_width;
    if x.abs() > r || y.abs() > r {
        return Err(GwError::invalid(format!(
            "z = {z} maps to (x, y) = ({x:.3}, {y:.3}) outside the grid ±{r}"
        )));
    }

    let engine = DftEngine::new(&link_basis);

    // input state: the ξ = 1 image of |z⟩, in the coordinate representation
    let mut input = u1_rotate(z, Complex64::ONE, &link_basis);
    input.dft_axis_with(&engine, 0, Direction::Inverse)?;
    input.dft_axis_with(&engine, 1, Direction::Inverse)?;
    let g2_before = angular_momentum_g(&input)?;

    // fixed-chunk ξ sum with ordered pairwise combination
    let weights = g.weights();
    let chunk = 256usize;
    let mut partials = kernels::chunked_partials(weights.len(), chunk, |range| {
        let mut acc = vec![Complex64::ZERO; dim];
        for flat in range {
            let w = weights[flat] * weights[flat];
            if w == 0.0 {
                continue;
            }
            let rotated = u1_rotate(z, g.xi_at(flat), &link_basis);
            for (a, b) in acc.iter_mut().zip(rotated.amplitudes()) {
                *a += w * b;
            }
        }
        acc
    });
    let summed = merge_partial_vectors(&mut partials);
    let mut projected = StateVector::from_parts(
        link_basis,
        vec![Rep::Momentum, Rep::Momentum],
        summed,
    );
    projected.dft_axis_with(&engine, 0, Direction::Inverse)?;
    projected.dft_axis_with(&engine, 1, Direction::Inverse)?;

    let norm_before = projected.norm();
    let annihilated = norm_before < 1e-12;
    let g2_after = if annihilated {
        0.0
    } else {
        projected.normalize();
        angular_momentum_g(&projected)?
    };
    Ok(ProjectionResult {
        projected,
        norm_before_normalization: norm_before,
        g2_before,
        g2_after,
        annihilated,
    })
}

/// Haar-average an arbitrary coordinate-representation link state: every
/// grid point of the input is carried around the group orbit, so this costs
/// O(Λ_ξ²·dim²) and is meant for diagnostics at small Λ.
pub fn project_u1_state(
    state: &StateVector,
    spec: &GaugeAverageSpec,
) -> Result<ProjectionResult, GwError> {
    if state.basis().n_axes() != 2 {
        return Err(GwError::invalid("U(1) projection acts on two-boson states"));
    }
    if state.reps().iter().any(|r| *r != Rep::Coordinate) {
        return Err(GwError::RepresentationMismatch {
            axis: 0,
            expected: "coordinate",
            found: "momentum",
        });
    }
    let g = build_g_state(spec)?;
    let link_basis = state.basis().clone();
    let dim = link_basis.dim();
    let engine = DftEngine::new(&link_basis);
    let g2_before = angular_momentum_g(state)?;

    let weights = g.weights();
    let lx = link_basis.register(0).levels();
    let coords: Vec<Complex64> = (0..dim)
        .map(|flat| {
            Complex64::new(
                link_basis.coordinate_at(flat, 0),
                link_basis.coordinate_at(flat, 1),
            ) / SQRT2
        })
        .collect();
    let amps = state.amplitudes();
    let mut partials = kernels::chunked_partials(weights.len(), 16, |range| {
        let mut acc = vec![Complex64::ZERO; dim];
        for flat in range {
            let w = weights[flat] * weights[flat];
            if w == 0.0 {
                continue;
            }
            let xi = g.xi_at(flat);
            for (src, c) in amps.iter().zip(&coords) {
                if src.re == 0.0 && src.im == 0.0 {
                    continue;
                }
                let rotated = u1_rotate(*c, xi, &link_basis);
                let factor = w * src;
                for (a, b) in acc.iter_mut().zip(rotated.amplitudes()) {
                    *a += factor * b;
                }
            }
        }
        acc
    });
    let _ = lx;
    let summed = merge_partial_vectors(&mut partials);
    let mut projected =
        StateVector::from_parts(link_basis, vec![Rep::Momentum, Rep::Momentum], summed);
    projected.dft_axis_with(&engine, 0, Direction::Inverse)?;
    projected.dft_axis_with(&engine, 1, Direction::Inverse)?;

    let norm_before = projected.norm();
    let annihilated = norm_before < 1e-12;
    let g2_after = if annihilated {
        0.0
    } else {
        projected.normalize();
        angular_momentum_g(&projected)?
    };
    Ok(ProjectionResult {
        projected,
        norm_before_normalization: norm_before,
        g2_before,
        g2_after,
        annihilated,
    })
}

/// Fixed-order pairwise merge of partial amplitude vectors.
fn merge_partial_vectors(parts: &mut Vec<Vec<Complex64>>) -> Vec<Complex64> {
    if parts.is_empty() {
        return Vec::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.drain(..);
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        drop(it);
        *parts = next;
    }
    parts.pop().unwrap()
}

/// Apply Ĝ = x̂·p̂_y − ŷ·p̂_x to a two-boson coordinate-representation state;
/// the momentum factors act through per-axis DFTs.
pub fn apply_g(state: &StateVector) -> Result<StateVector, GwError> {
    if state.basis().n_axes() != 2 {
        return Err(GwError::invalid("Ĝ acts on two-boson states"));
    }
    if state.reps().iter().any(|r| *r != Rep::Coordinate) {
        return Err(GwError::RepresentationMismatch {
            axis: 0,
            expected: "coordinate",
            found: "momentum",
        });
    }
    let basis = state.basis();
    let engine = DftEngine::new(basis);
    let rx = basis.register(0);
    let ry = basis.register(1);
    let lx = rx.levels();

    // x̂·(p̂_y ψ)
    let mut py_psi = state.clone();
    py_psi.dft_axis_with(&engine, 1, Direction::Forward)?;
    {
        let amps = py_psi.amplitudes_mut();
        kernels::map_inplace(amps, |flat, a| *a *= ry.momentum(flat / lx));
    }
    py_psi.dft_axis_with(&engine, 1, Direction::Inverse)?;
    {
        let amps = py_psi.amplitudes_mut();
        kernels::map_inplace(amps, |flat, a| *a *= rx.coordinate(flat % lx));
    }

    // ŷ·(p̂_x ψ)
    let mut px_psi = state.clone();
    px_psi.dft_axis_with(&engine, 0, Direction::Forward)?;
    {
        let amps = px_psi.amplitudes_mut();
        kernels::map_inplace(amps, |flat, a| *a *= rx.momentum(flat % lx));
    }
    px_psi.dft_axis_with(&engine, 0, Direction::Inverse)?;
    {
        let amps = px_psi.amplitudes_mut();
        kernels::map_inplace(amps, |flat, a| *a *= ry.coordinate(flat / lx));
    }

    let mut out = py_psi;
    {
        let sub = px_psi.amplitudes();
        let amps = out.amplitudes_mut();
        kernels::map_inplace(amps, |i, a| *a -= sub[i]);
    }
    Ok(out)
}

/// ⟨Ĝ⟩ on a two-boson coordinate-representation state.
pub fn g_expectation(state: &StateVector) -> Result<f64, GwError> {
    let g_psi = apply_g(state)?;
    Ok(state.inner(&g_psi)?.re)
}

/// ⟨Ĝ²⟩ via two applications of Ĝ; real and ≥ −1e−12 for any input.
pub fn angular_momentum_g(state: &StateVector) -> Result<f64, GwError> {
    let g_psi = apply_g(state)?;
    let gg_psi = apply_g(&g_psi)?;
    Ok(state.inner(&gg_psi)?.re)
}

/// Intermediate and final states of the Z₂ singlet-projection protocol.
pub struct Z2Projection {
    /// Labelled (n_ℓ+1)-qubit states after each protocol step; the ancilla
    /// is the highest qubit.
    pub steps: Vec<(String, Vec<Complex64>)>,
    /// Projected n_ℓ-qubit state, renormalized.
    pub state: Vec<Complex64>,
    /// Postselection amplitude ‖(ψ + X_m ψ)/2‖ before renormalization.
    pub postselect_norm: f64,
    pub annihilated: bool,
}

/// Z₂ singlet projection on `n_links` link qubits: tensor an ancilla |0⟩,
/// Hadamard it, CX from the ancilla onto every coupled link, project the
/// ancilla onto |+⟩, renormalize.
pub fn z2_project(
    amplitudes: &[Complex64],
    n_links: usize,
    coupled_links: &[usize],
) -> Result<Z2Projection, GwError> {
    if n_links < 1 {
        return Err(GwError::invalid("need at least one link qubit"));
    }
    let dim = 1usize
        .checked_shl(n_links as u32)
        .ok_or_else(|| GwError::invalid("too many links"))?;
    if amplitudes.len() != dim {
        return Err(GwError::invalid("amplitude length must be 2^n_links"));
    }
    if coupled_links.iter().any(|l| *l >= n_links) {
        return Err(GwError::invalid("coupled link index out of range"));
    }
    let anc = 1usize << n_links;
    let mut steps = Vec::new();

    // tensor |0⟩_ξ
    let mut psi = vec![Complex64::ZERO; dim * 2];
    psi[..dim].copy_from_slice(amplitudes);
    steps.push(("tensor |0>_xi".to_string(), psi.clone()));

    // Hadamard on the ancilla
    for b in 0..dim {
        let a0 = psi[b];
        let a1 = psi[b | anc];
        psi[b] = (a0 + a1) / SQRT2;
        psi[b | anc] = (a0 - a1) / SQRT2;
    }
    steps.push(("H on xi".to_string(), psi.clone()));

    // CX from the ancilla onto each coupled link
    for &link in coupled_links {
        let bit = 1usize << link;
        for b in 0..dim {
            if b & bit == 0 {
                let src = b | anc;
                let dst = b | bit | anc;
                psi.swap(src, dst);
            }
        }
        steps.push((format!("CX xi -> link {link}"), psi.clone()));
    }

    // project the ancilla onto |+⟩
    let mut out = vec![Complex64::ZERO; dim];
    for b in 0..dim {
        out[b] = (psi[b] + psi[b | anc]) / SQRT2;
    }
    let norm = kernels::norm_sq(&out).sqrt();
    let annihilated = norm < 1e-12;
    if !annihilated {
        let inv = Complex64::new(1.0 / norm, 0.0);
        kernels::scale_c64(inv, &mut out);
    }
    Ok(Z2Projection {
        steps,
        state: out,
        postselect_norm: norm,
        annihilated,
    })
}

/// Outcome of a Z_N register projection.
pub struct ZnProjection {
    pub state: Vec<Complex64>,
    pub postselect_norm: f64,
    pub annihilated: bool,
}

/// Average a state of `n_registers` registers of Q qubits each over the
/// simultaneous modular shifts b → b ⊕ s, s ∈ Z_N, with N = 2^Q.
pub fn zn_project(
    amplitudes: &[Complex64],
    n_registers: usize,
    n_group: usize,
) -> Result<ZnProjection, GwError> {
    if n_registers < 1 {
        return Err(GwError::invalid("need at least one register"));
    }
    if !n_group.is_power_of_two() || n_group < 2 {
        return Err(GwError::invalid("N must be 2^Q with Q ≥ 1"));
    }
    let dim = n_group
        .checked_pow(n_registers as u32)
        .ok_or_else(|| GwError::invalid("register space too large"))?;
    if amplitudes.len() != dim {
        return Err(GwError::invalid("amplitude length must be N^n_registers"));
    }
    let mut out = vec![Complex64::ZERO; dim];
    let inv_n = 1.0 / n_group as f64;
    kernels::map_inplace(&mut out, |idx, o| {
        // decode register values, average over the shifted source indices
        let mut acc = Complex64::ZERO;
        for s in 0..n_group {
            let mut src = 0usize;
            let mut rest = idx;
            let mut stride = 1usize;
            for _ in 0..n_registers {
                let b = rest % n_group;
                rest /= n_group;
                // target b came from source (b − s) mod N
                let from = (b + n_group - s) % n_group;
                src += from * stride;
                stride *= n_group;
            }
            acc += amplitudes[src];
        }
        *o = acc * inv_n;
    });
    let norm = kernels::norm_sq(&out).sqrt();
    let annihilated = norm < 1e-12;
    if !annihilated {
        let inv = Complex64::new(1.0 / norm, 0.0);
        kernels::scale_c64(inv, &mut out);
    }
    Ok(ZnProjection {
        state: out,
        postselect_norm: norm,
        annihilated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn link_basis(lambda: usize, r: f64) -> ProductBasis {
        ProductBasis::uniform(BosonRegister::from_levels(lambda, r).unwrap(), 2).unwrap()
    }

    #[test]
    fn g_state_normalized_and_symmetric() {
        let spec = GaugeAverageSpec::new(40.0, 2.0, 16).unwrap();
        let g = build_g_state(&spec).unwrap();
        let total: f64 = g.weights().iter().map(|w| w * w).sum();
        assert!((total - 1.0).abs() < 1e-10);

        // ξ → iξ maps the grid to itself: (x, y) → (−y, x)
        let lam = 16usize;
        for ky in 0..lam {
            for kx in 0..lam {
                let flat = ky * lam + kx;
                let rot = kx * lam + (lam - 1 - ky);
                let diff = (g.weights()[flat] - g.weights()[rot]).abs();
                assert!(diff < 1e-10, "rotation asymmetry {diff} at ({kx},{ky})");
            }
        }
    }

    #[test]
    fn g_state_peaks_on_unit_ring() {
        let spec = GaugeAverageSpec::new(40.0, 2.0, 32).unwrap();
        let g = build_g_state(&spec).unwrap();
        let peak = g
            .weights()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap()
            .0;
        let radius = g.xi_at(peak).norm();
        assert!((0.85..1.15).contains(&radius), "peak radius {radius}");
        // thickness ~ m^{-1/2}: mass within |ξ| ∈ 1 ± 3/√m should dominate
        let band = 3.0 / 40.0f64.sqrt();
        let in_band: f64 = (0..g.weights().len())
            .filter(|f| (g.xi_at(*f).norm() - 1.0).abs() < band)
            .map(|f| g.weights()[f] * g.weights()[f])
            .sum();
        assert!(in_band > 0.9, "ring band holds {in_band}");
    }

    #[test]
    fn u1_rotate_identity_recovers_grid_state() {
        let basis = link_basis(8, 2.0);
        let engine = DftEngine::new(&basis);
        // grid point (x, y) = (0.75, −0.25) → z = (x + iy)/√2
        let z = Complex64::new(0.75, -0.25) / SQRT2;
        let mut s = u1_rotate(z, Complex64::ONE, &basis);
        s.dft_axis_with(&engine, 0, Direction::Inverse).unwrap();
        s.dft_axis_with(&engine, 1, Direction::Inverse).unwrap();
        // expect the basis state at those grid indices
        let reg = basis.register(0);
        let kx = (0..8).find(|k| (reg.coordinate(*k) - 0.75).abs() < 1e-12).unwrap();
        let ky = (0..8).find(|k| (reg.coordinate(*k) + 0.25).abs() < 1e-12).unwrap();
        let flat = basis.encode(&[kx, ky]);
        assert!((s.amplitudes()[flat].norm() - 1.0).abs() < 1e-10);
        for (i, a) in s.amplitudes().iter().enumerate() {
            if i != flat {
                assert!(a.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn u1_rotate_minus_one_twice_is_identity() {
        let basis = link_basis(8, 2.0);
        let z = Complex64::new(0.75, 0.25) / SQRT2;
        let once = u1_rotate(z, -Complex64::ONE, &basis);
        // rotating the already-rotated label by −1 again lands on ξ = 1
        let z_rот = -z;
        let twice = u1_rotate(z_rот, -Complex64::ONE, &basis);
        let direct = u1_rotate(z, Complex64::ONE, &basis);
        for (a, b) in twice.amplitudes().iter().zip(direct.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        // and ξ = −1 is itself a grid symmetry: norm preserved
        assert!((once.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn u1_rotate_eighth_turn_concentrates_mass() {
        let basis = link_basis(16, 2.0);
        let engine = DftEngine::new(&basis);
        let z = Complex64::ONE / SQRT2; // (x, y) = (1, 0)
        let xi = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let mut s = u1_rotate(z, xi, &basis);
        s.dft_axis_with(&engine, 0, Direction::Inverse).unwrap();
        s.dft_axis_with(&engine, 1, Direction::Inverse).unwrap();
        let (peak, _) = s
            .amplitudes()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let px = basis.coordinate_at(peak, 0);
        let py = basis.coordinate_at(peak, 1);
        // target (cos π/4, sin π/4) ≈ (0.707, 0.707), within one grid cell
        let dx = basis.register(0).delta_x();
        assert!((px - std::f64::consts::FRAC_1_SQRT_2).abs() <= dx);
        assert!((py - std::f64::consts::FRAC_1_SQRT_2).abs() <= dx);
    }

    #[test]
    fn g_hermitian_and_symmetric_state_has_zero_expectation() {
        let basis = link_basis(8, 2.0);
        let s = StateVector::random(basis.clone(), 42);
        let g2 = angular_momentum_g(&s).unwrap();
        let g_psi = apply_g(&s).unwrap();
        let norm2 = g_psi.norm().powi(2);
        assert!((g2 - norm2).abs() < 1e-10, "⟨G²⟩ {g2} vs ‖Gψ‖² {norm2}");
        assert!(g2 >= -1e-12);

        // symmetrize over the full grid point group (rotations and the
        // x ↔ y reflection, under which Ĝ flips sign): ⟨G⟩ = 0
        let lam = 8usize;
        let mut amps = vec![Complex64::ZERO; basis.dim()];
        for ky in 0..lam {
            for kx in 0..lam {
                let orbit = [
                    (kx, ky),
                    (lam - 1 - ky, kx),
                    (lam - 1 - kx, lam - 1 - ky),
                    (ky, lam - 1 - kx),
                    (ky, kx),
                    (kx, lam - 1 - ky),
                    (lam - 1 - ky, lam - 1 - kx),
                    (lam - 1 - kx, ky),
                ];
                let v: Complex64 = orbit
                    .iter()
                    .map(|(a, b)| s.amplitudes()[b * lam + a])
                    .sum();
                amps[ky * lam + kx] = v;
            }
        }
        let mut sym = StateVector::from_amplitudes(basis, amps).unwrap();
        sym.normalize();
        let gexp = g_expectation(&sym).unwrap();
        assert!(gexp.abs() < 1e-10, "⟨G⟩ = {gexp}");
    }

    #[test]
    fn coordinate_state_on_x_axis_has_positive_g2() {
        let basis = link_basis(8, 2.0);
        let reg = basis.register(0);
        let kx = (0..8).find(|k| (reg.coordinate(*k) - 0.75).abs() < 1e-12).unwrap();
        let ky = 4; // y = 0.25, closest row to the axis
        let s = StateVector::basis_state(basis.clone(), basis.encode(&[kx, ky]));
        let g2 = angular_momentum_g(&s).unwrap();
        assert!(g2 > 0.1, "⟨G²⟩ = {g2}");
    }

    #[test]
    fn projection_suppresses_g2_on_localized_input() {
        let spec = GaugeAverageSpec::new(40.0, 2.0, 12).unwrap();
        let z = Complex64::new(1.0 - 2.0 / 12.0, 0.0) / SQRT2;
        let first = project_u1(z, &spec, 12).unwrap();
        assert!(!first.annihilated);
        assert!(first.g2_after < first.g2_before);
    }

    #[test]
    fn projection_on_ring_state_keeps_g2_at_truncation_scale() {
        // The ξ-ground-state transplanted to the link grid is the (almost)
        // invariant input: its ⟨Ĝ²⟩ sits at truncation noise and must stay
        // there through the projection, in contrast to O(10²) for a grid
        // basis state at this Λ. Bands frozen from the dense oracle run.
        let lambda = 32;
        let h = crate::models::build_xi_u1(40.0, 2.0, lambda, 1 << 20).unwrap();
        let sol = crate::spectrum::lanczos_lowk(&h, 1, 1e-10).unwrap();
        let ring = sol.state(0, h.basis()).unwrap();
        let spec = GaugeAverageSpec::new(40.0, 2.0, lambda).unwrap();
        let res = project_u1_state(&ring, &spec).unwrap();
        assert!(res.g2_before < 1e-5, "ring state g2 {}", res.g2_before);
        assert!(res.g2_after < 1e-4, "projected ring g2 {}", res.g2_after);
        assert!(res.norm_before_normalization > 0.9);
    }

    #[test]
    fn double_projection_keeps_suppressing_g2() {
        // Repeated truncated averaging suppresses the residual non-singlet
        // component further each pass; values frozen from the oracle run
        // (g2 drops by >70% at Λ=16 while ~87% of the mass survives).
        let lambda = 16;
        let spec = GaugeAverageSpec::new(40.0, 2.0, lambda).unwrap();
        let z = Complex64::new(1.0 - 2.0 / lambda as f64, 0.0) / SQRT2;
        let first = project_u1(z, &spec, lambda).unwrap();
        let second = project_u1_state(&first.projected, &spec).unwrap();
        // the two routes must agree on the intermediate diagnostic exactly
        assert!((second.g2_before - first.g2_after).abs() < 1e-10);
        assert!(second.g2_after < 0.3 * first.g2_after);
        assert!(second.norm_before_normalization > 0.8);
    }

    #[test]
    fn projection_is_contraction() {
        let spec = GaugeAverageSpec::new(40.0, 2.0, 8).unwrap();
        for (xg, yg) in [(0.75, 0.25), (0.25, -0.75), (1.25, 0.25)] {
            let z = Complex64::new(xg, yg) / SQRT2;
            let res = project_u1(z, &spec, 8).unwrap();
            assert!(
                res.norm_before_normalization <= 1.0 + 1e-12,
                "norm {} at ({xg},{yg})",
                res.norm_before_normalization
            );
        }
    }

    #[test]
    fn z2_bell_from_00() {
        let amps = vec![cx(1.0), cx(0.0), cx(0.0), cx(0.0)];
        let p = z2_project(&amps, 2, &[0, 1]).unwrap();
        assert!(!p.annihilated);
        assert!((p.postselect_norm - 1.0 / SQRT2).abs() < 1e-12);
        let inv = 1.0 / SQRT2;
        assert!((p.state[0] - cx(inv)).norm() < 1e-12);
        assert!((p.state[3] - cx(inv)).norm() < 1e-12);
        assert!(p.state[1].norm() < 1e-12 && p.state[2].norm() < 1e-12);
        // five recorded stages: tensor, H, CX×2 (projection is the return)
        assert_eq!(p.steps.len(), 4);
    }

    #[test]
    fn z2_symmetric_input_unchanged() {
        let inv = 1.0 / SQRT2;
        let amps = vec![cx(inv), cx(0.0), cx(0.0), cx(inv)];
        let p = z2_project(&amps, 2, &[0, 1]).unwrap();
        assert!((p.postselect_norm - 1.0).abs() < 1e-12);
        for (a, b) in p.state.iter().zip(&amps) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn z2_antisymmetric_input_annihilated() {
        let inv = 1.0 / SQRT2;
        let amps = vec![cx(inv), cx(0.0), cx(0.0), cx(-inv)];
        let p = z2_project(&amps, 2, &[0, 1]).unwrap();
        assert!(p.annihilated);
        assert!(p.postselect_norm < 1e-12);
    }

    #[test]
    fn z2_projection_idempotent() {
        let amps: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(0.3 + i as f64, 1.0 - 0.2 * i as f64))
            .collect();
        let mut normed = amps;
        let n = kernels::norm_sq(&normed).sqrt();
        for a in &mut normed {
            *a /= n;
        }
        let once = z2_project(&normed, 3, &[0, 2]).unwrap();
        let twice = z2_project(&once.state, 3, &[0, 2]).unwrap();
        assert!((twice.postselect_norm - 1.0).abs() < 1e-12);
        for (a, b) in twice.state.iter().zip(&once.state) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zn_reduces_to_z2() {
        let amps: Vec<Complex64> = (0..4)
            .map(|i| Complex64::new(1.0 + i as f64, 0.5 * i as f64))
            .collect();
        let mut normed = amps;
        let n = kernels::norm_sq(&normed).sqrt();
        for a in &mut normed {
            *a /= n;
        }
        let z2 = z2_project(&normed, 2, &[0, 1]).unwrap();
        let zn = zn_project(&normed, 2, 2).unwrap();
        assert!((z2.postselect_norm - zn.postselect_norm).abs() < 1e-12);
        for (a, b) in z2.state.iter().zip(&zn.state) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zn_uniform_input_unchanged() {
        let dim = 16;
        let amp = cx(1.0 / (dim as f64).sqrt());
        let amps = vec![amp; dim];
        let p = zn_project(&amps, 2, 4).unwrap();
        assert!((p.postselect_norm - 1.0).abs() < 1e-12);
        for a in &p.state {
            assert!((a - amp).norm() < 1e-12);
        }
    }

    #[test]
    fn zn_basis_state_becomes_shift_orbit() {
        // |b1=1, b2=2⟩ over two Z4 registers → equal superposition of the
        // four simultaneous shifts
        let dim = 16;
        let mut amps = vec![cx(0.0); dim];
        amps[1 + 4 * 2] = cx(1.0);
        let p = zn_project(&amps, 2, 4).unwrap();
        let expect = 0.5f64;
        let mut hits = 0;
        for s in 0..4usize {
            let idx = ((1 + s) % 4) + 4 * ((2 + s) % 4);
            assert!((p.state[idx] - cx(expect)).norm() < 1e-12);
            hits += 1;
        }
        assert_eq!(hits, 4);
        let total: f64 = p.state.iter().map(|a| a.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zn_commutes_with_shift_invariant_diagonal() {
        // O diagonal with O(b1, b2) = f((b1 − b2) mod N) is shift invariant
        let n = 4usize;
        let dim = 16;
        let s = StateVector::random(
            ProductBasis::uniform(BosonRegister::from_levels(16, 1.0).unwrap(), 1).unwrap(),
            77,
        );
        let amps = s.amplitudes().to_vec();
        let p = zn_project(&amps, 2, n).unwrap();
        let f = |b1: usize, b2: usize| ((b1 + n - b2) % n) as f64 * 0.7 + 0.1;
        let expect_val = |state: &[Complex64]| -> f64 {
            let mut acc = 0.0;
            for b2 in 0..n {
                for b1 in 0..n {
                    acc += state[b1 + n * b2].norm_sqr() * f(b1, b2);
                }
            }
            acc
        };
        // projecting O·ψ equals O applied pointwise to the projection
        // of ψ only at the expectation level
        let mut o_psi = amps.clone();
        for b2 in 0..n {
            for b1 in 0..n {
                o_psi[b1 + n * b2] *= f(b1, b2);
            }
        }
        let p_o = zn_project(&o_psi, 2, n).unwrap();
        let lhs: Complex64 = p
            .state
            .iter()
            .zip(&p_o.state)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * p.postselect_norm
            * p_o.postselect_norm;
        let mut rhs = Complex64::ZERO;
        for b2 in 0..n {
            for b1 in 0..n {
                let idx = b1 + n * b2;
                rhs += p.state[idx].conj() * f(b1, b2) * p.state[idx];
            }
        }
        rhs *= p.postselect_norm * p.postselect_norm;
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
        let _ = expect_val;
    }

    #[test]
    fn dim_16_statevector_norm_is_one() {
        let spec = GaugeAverageSpec::new(40.0, 2.0, 8).unwrap();
        let g = build_g_state(&spec).unwrap();
        let basis = link_basis(8, 2.0);
        let s = u1_rotate(Complex64::new(0.3, 0.1), g.xi_at(20), &basis);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}
