//! Second-order split-operator (Strang) time evolution, an exact-evolution
//! oracle, and fidelity diagnostics.
//!
//! One step applies exp(−iV·dt/2), a forward DFT on all axes, exp(−iK·dt),
//! the inverse DFT, and exp(−iV·dt/2) again. The DFT phase convention
//! cancels inside the conjugation, so the step is exactly unitary.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::GwError;
use crate::kernels;
use crate::models::SeparableHamiltonian;
use crate::qgrid::{Rep, StateVector};
use crate::spectrum::dense_spectrum;

fn check_coordinate(state: &StateVector) -> Result<(), GwError> {
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

/// Precomputed phase tables for repeated Strang steps at a fixed dt.
pub struct StrangPropagator<'h> {
    h: &'h SeparableHamiltonian,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    pub dt: f64,
}

impl<'h> StrangPropagator<'h> {
    pub fn new(h: &'h SeparableHamiltonian, dt: f64) -> Self {
        let half_potential = h
            .potential_diag()
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / 2.0))
            .collect();
        let kinetic = h
            .kinetic_diag()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -k * dt))
            .collect();
        StrangPropagator {
            h,
            half_potential,
            kinetic,
            dt,
        }
    }

    /// One in-place step on coordinate-representation amplitudes.
    pub fn step(&self, amps: &mut [Complex64]) {
        let hp = &self.half_potential;
        kernels::map_inplace(amps, |i, a| *a *= hp[i]);
        self.h.engine().forward_all(amps);
        let kp = &self.kinetic;
        kernels::map_inplace(amps, |i, a| *a *= kp[i]);
        self.h.engine().inverse_all(amps);
        kernels::map_inplace(amps, |i, a| *a *= hp[i]);
    }
}

/// One second-order split step exp(−iV dt/2)·F⁻¹exp(−iK dt)F·exp(−iV dt/2).
pub fn strang_step(
    state: StateVector,
    h: &SeparableHamiltonian,
    dt: f64,
) -> Result<StateVector, GwError> {
    check_coordinate(&state)?;
    if state.basis() != h.basis() {
        return Err(GwError::BasisMismatch);
    }
    let mut state = state;
    StrangPropagator::new(h, dt).step(state.amplitudes_mut());
    Ok(state)
}

/// Trotter evolution to time t: ⌈t/dt⌉ Strang steps, the final one sized to
/// the remainder so the endpoint is exact.
pub fn evolve(
    state: StateVector,
    h: &SeparableHamiltonian,
    t: f64,
    dt: f64,
) -> Result<StateVector, GwError> {
    if t < 0.0 || !(dt > 0.0) {
        return Err(GwError::invalid("need t ≥ 0 and dt > 0"));
    }
    check_coordinate(&state)?;
    if state.basis() != h.basis() {
        return Err(GwError::BasisMismatch);
    }
    let mut state = state;
    let full = (t / dt + 1e-9).floor() as u64;
    let remainder = t - full as f64 * dt;
    if full > 0 {
        let prop = StrangPropagator::new(h, dt);
        for _ in 0..full {
            prop.step(state.amplitudes_mut());
        }
    }
    if remainder > 1e-12 * t.max(1.0) {
        StrangPropagator::new(h, remainder).step(state.amplitudes_mut());
    }
    Ok(state)
}

/// Exact-evolution backend: spectral decomposition for small dimensions, an
/// adaptive Krylov propagator otherwise.
pub struct ExactPropagator<'h> {
    h: &'h SeparableHamiltonian,
    dense: Option<(Vec<f64>, Vec<Vec<f64>>)>,
    /// Local error budget per unit time for the Krylov backend.
    pub tol_per_time: f64,
}

/// Dimension at or below which `ExactPropagator::new` picks the dense route.
pub const EXACT_DENSE_CAP: usize = 1 << 11;

impl<'h> ExactPropagator<'h> {
    /// Dense backend when dim ≤ 2^11, Krylov otherwise.
    pub fn new(h: &'h SeparableHamiltonian) -> Result<Self, GwError> {
        if h.dim() <= EXACT_DENSE_CAP {
            Self::new_dense(h)
        } else {
            Ok(Self::new_krylov(h, 1e-12))
        }
    }

    pub fn new_dense(h: &'h SeparableHamiltonian) -> Result<Self, GwError> {
        let spec = dense_spectrum(h, h.dim())?;
        Ok(ExactPropagator {
            h,
            dense: Some((spec.eigenvalues, spec.eigenvectors.unwrap())),
            tol_per_time: 0.0,
        })
    }

    pub fn new_krylov(h: &'h SeparableHamiltonian, tol_per_time: f64) -> Self {
        ExactPropagator {
            h,
            dense: None,
            tol_per_time,
        }
    }

    /// Advance the state by exp(−iHt) in place.
    pub fn advance(&self, state: &mut StateVector, t: f64) -> Result<(), GwError> {
        check_coordinate(state)?;
        if state.basis() != self.h.basis() {
            return Err(GwError::BasisMismatch);
        }
        match &self.dense {
            Some((evals, evecs)) => {
                let amps = state.amplitudes_mut();
                let dim = amps.len();
                let mut out = vec![Complex64::ZERO; dim];
                for (lambda, v) in evals.iter().zip(evecs) {
                    let mut proj = Complex64::ZERO;
                    for (a, vi) in amps.iter().zip(v) {
                        proj += a * vi;
                    }
                    let phase = Complex64::from_polar(1.0, -lambda * t);
                    kernels::map_inplace(&mut out, |i, o| *o += phase * proj * v[i]);
                }
                amps.copy_from_slice(&out);
                Ok(())
            }
            None => self.krylov_advance(state, t),
        }
    }

    fn krylov_advance(&self, state: &mut StateVector, t: f64) -> Result<(), GwError> {
        const M: usize = 36;
        let dim = self.h.dim();
        let mut remaining = t;
        let mut tau = t;
        let mut cwork = vec![Complex64::ZERO; dim];
        let mut hv = vec![Complex64::ZERO; dim];
        let mut guard = 0usize;
        while remaining > 1e-14 * t.max(1.0) {
            guard += 1;
            if guard > 100_000 {
                return Err(GwError::NonConvergence(
                    "Krylov propagator failed to advance".into(),
                ));
            }
            tau = tau.min(remaining);
            let norm0 = kernels::norm_sq(state.amplitudes()).sqrt();
            if norm0 == 0.0 {
                return Ok(());
            }
            // Hermitian Lanczos on the complex state
            let m = M.min(dim);
            let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m);
            let mut v0 = state.amplitudes().to_vec();
            kernels::scale_c64(Complex64::new(1.0 / norm0, 0.0), &mut v0);
            basis.push(v0);
            let mut alpha = vec![0.0f64; m];
            let mut beta = vec![0.0f64; m];
            let mut used = 1usize;
            let mut breakdown = false;
            for j in 0..m {
                self.h.matvec_complex(&basis[j], &mut hv, &mut cwork);
                let mut w = hv.clone();
                // two-pass projection keeps the basis orthonormal
                for _ in 0..2 {
                    for (i, b) in basis.iter().enumerate() {
                        let c = kernels::dot_conj(b, &w);
                        if i == j {
                            alpha[j] += c.re;
                        }
                        kernels::axpy_c64(-c, b, &mut w);
                    }
                }
                let b = kernels::norm_sq(&w).sqrt();
                if j + 1 == m {
                    beta[j] = b;
                    break;
                }
                if b < 1e-12 * alpha[j].abs().max(1.0) {
                    breakdown = true;
                    used = j + 1;
                    break;
                }
                beta[j] = b;
                kernels::scale_c64(Complex64::new(1.0 / b, 0.0), &mut w);
                basis.push(w);
                used = j + 2;
            }

            // u(τ) = exp(−iTτ)·e₁ via the small symmetric eigenproblem
            let mm = used;
            let tmat = DMatrix::<f64>::from_fn(mm, mm, |i, j| {
                if i == j {
                    alpha[i]
                } else if j == i + 1 {
                    beta[i]
                } else if i == j + 1 {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = nalgebra::SymmetricEigen::new(tmat);
            let expu = |tau: f64| -> Vec<Complex64> {
                let mut u = vec![Complex64::ZERO; mm];
                for c in 0..mm {
                    let w1c = eig.eigenvectors[(0, c)];
                    let phase = Complex64::from_polar(1.0, -eig.eigenvalues[c] * tau);
                    for r in 0..mm {
                        u[r] += eig.eigenvectors[(r, c)] * w1c * phase;
                    }
                }
                u
            };

            // Shrink τ until the residual-coupling estimate fits the budget.
            // Once |u_end| reaches the rounding level of the small
            // eigenproblem the true coupling has underflowed, so accept.
            let beta_out = beta[mm - 1];
            let mut u = expu(tau);
            if !breakdown {
                while u[mm - 1].norm() > 1e-15
                    && beta_out * u[mm - 1].norm() > self.tol_per_time * tau
                    && tau > 1e-12
                {
                    tau /= 2.0;
                    u = expu(tau);
                }
            }

            let amps = state.amplitudes_mut();
            kernels::map_inplace(amps, |_, a| *a = Complex64::ZERO);
            for (r, b) in basis.iter().take(mm).enumerate() {
                kernels::axpy_c64(u[r] * norm0, b, amps);
            }
            remaining -= tau;
            tau *= 2.0;
        }
        Ok(())
    }
}

/// exp(−iHt)|ψ⟩ with the automatic backend choice.
pub fn exact_evolve(
    state: StateVector,
    h: &SeparableHamiltonian,
    t: f64,
) -> Result<StateVector, GwError> {
    let mut state = state;
    ExactPropagator::new(h)?.advance(&mut state, t)?;
    Ok(state)
}

/// |⟨a|b⟩|²; states must share basis and representation.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, GwError> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Fidelity |⟨ψ_exact(t)|ψ_trotter(t)⟩|² sampled every `sample_every` steps.
pub fn fidelity_curve(
    h: &SeparableHamiltonian,
    initial: &StateVector,
    t_max: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<(f64, f64)>, GwError> {
    if sample_every == 0 {
        return Err(GwError::invalid("sample_every must be ≥ 1"));
    }
    check_coordinate(initial)?;
    let steps = (t_max / dt + 1e-9).round() as usize;
    let prop = StrangPropagator::new(h, dt);
    let exact = ExactPropagator::new(h)?;
    let mut trotter = initial.clone();
    let mut reference = initial.clone();
    let mut out = vec![(0.0, 1.0)];
    let mut done = 0usize;
    while done < steps {
        let batch = sample_every.min(steps - done);
        for _ in 0..batch {
            prop.step(trotter.amplitudes_mut());
        }
        done += batch;
        let t = done as f64 * dt;
        exact.advance(&mut reference, batch as f64 * dt)?;
        out.push((t, fidelity(&reference, &trotter)?));
    }
    Ok(out)
}
