//! Discretized boson registers and the coordinate ↔ momentum change of basis.
//!
//! Each register holds one boson on Λ grid points spanning `[-R, R)` with
//! spacing δx = 2R/Λ. Grid values sit at half-integer multiples of the
//! spacing, ±δx/2, ±3δx/2, …, ±(Λ−1)δx/2, so neither representation contains
//! an exact zero mode. The momentum grid uses δp = π/R, which makes
//! δx·δp = 2π/Λ and the change of basis an ordinary FFT dressed with
//! half-integer phase factors.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GwError;
use crate::kernels;

/// Which representation a register axis is currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Coordinate,
    Momentum,
}

impl Rep {
    fn name(self) -> &'static str {
        match self {
            Rep::Coordinate => "coordinate",
            Rep::Momentum => "momentum",
        }
    }
}

/// Transform direction for [`StateVector::dft_axis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Coordinate → momentum, kernel ⟨p_k|x_j⟩ = e^{−i p_k x_j}/√Λ.
    Forward,
    /// Momentum → coordinate (exact adjoint of forward).
    Inverse,
}

/// One discretized boson: Λ levels on a symmetric grid of half-width R.
///
/// Qubit-mapped registers have Λ = 2^Q; the numerical experiments also use
/// general even Λ (e.g. 12, 20, 24, 48), for which no qubit mapping exists
/// but every grid operation is identical.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonRegister {
    levels: usize,
    half_width: f64,
}

impl BosonRegister {
    /// Register with Λ = 2^Q levels.
    pub fn from_qubits(qubits: u32, half_width: f64) -> Result<Self, GwError> {
        if qubits == 0 {
            return Err(GwError::invalid("qubit count must be ≥ 1"));
        }
        if qubits >= usize::BITS {
            return Err(GwError::invalid(format!("qubit count {qubits} too large")));
        }
        Self::from_levels(1usize << qubits, half_width)
    }

    /// Register with an arbitrary even number of levels Λ ≥ 2.
    pub fn from_levels(levels: usize, half_width: f64) -> Result<Self, GwError> {
        if levels < 2 || levels % 2 != 0 {
            return Err(GwError::invalid(format!(
                "level count must be even and ≥ 2, got {levels}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(GwError::invalid("half-width must be positive"));
        }
        Ok(BosonRegister { levels, half_width })
    }

    /// Truncation level Λ.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Grid half-width R.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Qubit count Q with Λ = 2^Q, when Λ is a power of two.
    pub fn qubit_count(&self) -> Option<u32> {
        self.levels
            .is_power_of_two()
            .then(|| self.levels.trailing_zeros())
    }

    /// Coordinate spacing δx = 2R/Λ.
    pub fn delta_x(&self) -> f64 {
        2.0 * self.half_width / self.levels as f64
    }

    /// Momentum spacing δp = π/R.
    pub fn delta_p(&self) -> f64 {
        PI / self.half_width
    }

    /// Coordinate at grid index k: (2k − Λ + 1)·δx/2, strictly increasing.
    pub fn coordinate(&self, k: usize) -> f64 {
        (2.0 * k as f64 - (self.levels - 1) as f64) * 0.5 * self.delta_x()
    }

    /// Momentum at grid index k: (2k − Λ + 1)·δp/2.
    pub fn momentum(&self, k: usize) -> f64 {
        (2.0 * k as f64 - (self.levels - 1) as f64) * 0.5 * self.delta_p()
    }
}

/// All Λ coordinate grid values, ascending.
pub fn coordinate_values(reg: &BosonRegister) -> Vec<f64> {
    (0..reg.levels()).map(|k| reg.coordinate(k)).collect()
}

/// All Λ momentum grid values, ascending.
pub fn momentum_values(reg: &BosonRegister) -> Vec<f64> {
    (0..reg.levels()).map(|k| reg.momentum(k)).collect()
}

/// Tensor product of boson registers with a flat-index codec.
///
/// Register 0 varies fastest: flat = Σ_a k_a · stride_a with
/// stride_a = ∏_{b<a} Λ_b.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    registers: Vec<BosonRegister>,
    strides: Vec<usize>,
    dim: usize,
}

impl ProductBasis {
    pub fn new(registers: Vec<BosonRegister>) -> Result<Self, GwError> {
        if registers.is_empty() {
            return Err(GwError::invalid("basis needs at least one register"));
        }
        let mut strides = Vec::with_capacity(registers.len());
        let mut dim: usize = 1;
        for reg in &registers {
            strides.push(dim);
            dim = dim
                .checked_mul(reg.levels())
                .ok_or_else(|| GwError::invalid("basis dimension overflows usize"))?;
        }
        Ok(ProductBasis {
            registers,
            strides,
            dim,
        })
    }

    /// Basis of `count` identical registers.
    pub fn uniform(reg: BosonRegister, count: usize) -> Result<Self, GwError> {
        Self::new(vec![reg; count])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn registers(&self) -> &[BosonRegister] {
        &self.registers
    }

    pub fn register(&self, axis: usize) -> &BosonRegister {
        &self.registers[axis]
    }

    pub fn n_axes(&self) -> usize {
        self.registers.len()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Flat index from per-register grid indices.
    pub fn encode(&self, indices: &[usize]) -> usize {
        debug_assert_eq!(indices.len(), self.registers.len());
        indices
            .iter()
            .zip(&self.strides)
            .map(|(k, s)| k * s)
            .sum()
    }

    /// Per-register grid indices from a flat index.
    pub fn decode(&self, flat: usize, out: &mut [usize]) {
        debug_assert!(flat < self.dim);
        let mut rest = flat;
        for (a, reg) in self.registers.iter().enumerate() {
            out[a] = rest % reg.levels();
            rest /= reg.levels();
        }
    }

    /// Grid index of one axis extracted from a flat index.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.registers[axis].levels()
    }

    /// Coordinate of one axis at a flat index.
    pub fn coordinate_at(&self, flat: usize, axis: usize) -> f64 {
        self.registers[axis].coordinate(self.axis_index(flat, axis))
    }

    /// Evaluate `f(x_0, …, x_{n-1})` on every grid point, flat order.
    pub fn evaluate_on_grid<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = self.n_axes();
        let mut out = vec![0.0; self.dim];
        kernels::for_each_chunk_mut(&mut out, kernels::CHUNK, |base, chunk| {
            let mut idx = vec![0usize; n];
            let mut coords = vec![0.0; n];
            for (i, v) in chunk.iter_mut().enumerate() {
                self.decode(base + i, &mut idx);
                for a in 0..n {
                    coords[a] = self.registers[a].coordinate(idx[a]);
                }
                *v = f(&coords);
            }
        });
        out
    }
}

/// Complex amplitudes over a [`ProductBasis`], with a representation tag per
/// axis recording which axes have been Fourier transformed.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: ProductBasis,
    reps: Vec<Rep>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// All-zero state in the coordinate representation.
    pub fn zero(basis: ProductBasis) -> Self {
        let reps = vec![Rep::Coordinate; basis.n_axes()];
        let amps = vec![Complex64::ZERO; basis.dim()];
        StateVector { basis, reps, amps }
    }

    /// Coordinate basis state |flat⟩.
    pub fn basis_state(basis: ProductBasis, flat: usize) -> Self {
        let mut s = Self::zero(basis);
        s.amps[flat] = Complex64::ONE;
        s
    }

    pub(crate) fn from_parts(basis: ProductBasis, reps: Vec<Rep>, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), basis.dim());
        debug_assert_eq!(reps.len(), basis.n_axes());
        StateVector { basis, reps, amps }
    }

    pub fn from_amplitudes(basis: ProductBasis, amps: Vec<Complex64>) -> Result<Self, GwError> {
        if amps.len() != basis.dim() {
            return Err(GwError::invalid(format!(
                "amplitude length {} does not match basis dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        let reps = vec![Rep::Coordinate; basis.n_axes()];
        Ok(StateVector { basis, reps, amps })
    }

    /// Seeded random normalized state (coordinate representation).
    pub fn random(basis: ProductBasis, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..basis.dim())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut s = StateVector {
            reps: vec![Rep::Coordinate; basis.n_axes()],
            basis,
            amps,
        };
        s.normalize();
        s
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn rep(&self, axis: usize) -> Rep {
        self.reps[axis]
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn norm(&self) -> f64 {
        kernels::norm_sq(&self.amps).sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = Complex64::new(1.0 / n, 0.0);
            kernels::scale_c64(inv, &mut self.amps);
        }
        n
    }

    /// ⟨self|other⟩; both states must share basis and representation tags.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, GwError> {
        if self.basis != other.basis || self.reps != other.reps {
            return Err(GwError::BasisMismatch);
        }
        Ok(kernels::dot_conj(&self.amps, &other.amps))
    }

    /// Unitary change of basis along one axis; flips the representation tag.
    pub fn dft_axis(mut self, axis: usize, direction: Direction) -> Result<StateVector, GwError> {
        let engine = DftEngine::new(&self.basis);
        self.dft_axis_with(&engine, axis, direction)?;
        Ok(self)
    }

    /// In-place variant of [`Self::dft_axis`] reusing a prebuilt engine.
    pub fn dft_axis_with(
        &mut self,
        engine: &DftEngine,
        axis: usize,
        direction: Direction,
    ) -> Result<(), GwError> {
        if axis >= self.basis.n_axes() {
            return Err(GwError::invalid(format!("axis {axis} out of range")));
        }
        let expected = match direction {
            Direction::Forward => Rep::Coordinate,
            Direction::Inverse => Rep::Momentum,
        };
        if self.reps[axis] != expected {
            return Err(GwError::RepresentationMismatch {
                axis,
                expected: expected.name(),
                found: self.reps[axis].name(),
            });
        }
        engine.apply(&mut self.amps, axis, direction);
        self.reps[axis] = match direction {
            Direction::Forward => Rep::Momentum,
            Direction::Inverse => Rep::Coordinate,
        };
        Ok(())
    }
}

struct AxisPlan {
    lambda: usize,
    stride: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Half-integer grid phase e^{iπ(Λ−1)t/Λ}, t = 0..Λ.
    w: Vec<Complex64>,
    /// e^{−iπ(Λ−1)²/(2Λ)} / √Λ (forward); conjugate for inverse.
    scale_fwd: Complex64,
    scale_inv: Complex64,
}

/// Prepared FFT plans and phase tables for every axis of a basis.
pub struct DftEngine {
    dim: usize,
    plans: Vec<AxisPlan>,
}

impl DftEngine {
    pub fn new(basis: &ProductBasis) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let plans = basis
            .registers()
            .iter()
            .enumerate()
            .map(|(axis, reg)| {
                let lambda = reg.levels();
                let lamf = lambda as f64;
                let w = (0..lambda)
                    .map(|t| Complex64::from_polar(1.0, PI * (lamf - 1.0) * t as f64 / lamf))
                    .collect();
                let phi0 = -PI * (lamf - 1.0) * (lamf - 1.0) / (2.0 * lamf);
                let scale_fwd = Complex64::from_polar(1.0 / lamf.sqrt(), phi0);
                AxisPlan {
                    lambda,
                    stride: basis.stride(axis),
                    fwd: planner.plan_fft_forward(lambda),
                    inv: planner.plan_fft_inverse(lambda),
                    w,
                    scale_fwd,
                    scale_inv: scale_fwd.conj(),
                }
            })
            .collect();
        DftEngine {
            dim: basis.dim(),
            plans,
        }
    }

    pub fn n_axes(&self) -> usize {
        self.plans.len()
    }

    /// Transform `amps` along `axis`. Representation bookkeeping is the
    /// caller's responsibility.
    pub fn apply(&self, amps: &mut [Complex64], axis: usize, direction: Direction) {
        debug_assert_eq!(amps.len(), self.dim);
        let plan = &self.plans[axis];
        if plan.stride == 1 {
            self.transform_lines(amps, plan, direction);
            return;
        }
        // Gather strided lines into a contiguous buffer, transform, scatter.
        let lambda = plan.lambda;
        let stride = plan.stride;
        let block = lambda * stride;
        let mut buf = vec![Complex64::ZERO; amps.len()];
        {
            let src = &*amps;
            kernels::for_each_chunk_mut(&mut buf, lambda, |base, line| {
                let line_id = base / lambda;
                let outer = line_id / stride;
                let off = line_id % stride;
                let src_base = outer * block + off;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = src[src_base + k * stride];
                }
            });
        }
        self.transform_lines(&mut buf, plan, direction);
        {
            let src = &buf;
            kernels::for_each_chunk_mut(amps, block, |base, chunk| {
                let outer = base / block;
                for off in 0..stride {
                    let line_base = (outer * stride + off) * lambda;
                    for k in 0..lambda {
                        chunk[k * stride + off] = src[line_base + k];
                    }
                }
            });
        }
    }

    /// Forward transform on every axis still needing one, in axis order.
    pub fn forward_all(&self, amps: &mut [Complex64]) {
        for axis in 0..self.plans.len() {
            self.apply(amps, axis, Direction::Forward);
        }
    }

    /// Inverse transform on every axis, in axis order.
    pub fn inverse_all(&self, amps: &mut [Complex64]) {
        for axis in 0..self.plans.len() {
            self.apply(amps, axis, Direction::Inverse);
        }
    }

    fn transform_lines(&self, data: &mut [Complex64], plan: &AxisPlan, direction: Direction) {
        let lambda = plan.lambda;
        // Batch several lines per task to amortize scratch allocation.
        let lines_per_task = (8192 / lambda).max(1);
        let chunk = lines_per_task * lambda;
        kernels::for_each_chunk_mut(data, chunk, |_, slab| {
            let (fft, scale) = match direction {
                Direction::Forward => (&plan.fwd, plan.scale_fwd),
                Direction::Inverse => (&plan.inv, plan.scale_inv),
            };
            let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
            for line in slab.chunks_mut(lambda) {
                match direction {
                    Direction::Forward => {
                        for (x, w) in line.iter_mut().zip(&plan.w) {
                            *x *= w;
                        }
                        fft.process_with_scratch(line, &mut scratch);
                        for (x, w) in line.iter_mut().zip(&plan.w) {
                            *x *= w * scale;
                        }
                    }
                    Direction::Inverse => {
                        for (x, w) in line.iter_mut().zip(&plan.w) {
                            *x *= w.conj();
                        }
                        fft.process_with_scratch(line, &mut scratch);
                        for (x, w) in line.iter_mut().zip(&plan.w) {
                            *x *= w.conj() * scale;
                        }
                    }
                }
            }
        });
    }
}
