//! Statevector workbench for gauge-theory Hamiltonians with qubit-truncated
//! boson registers.
//!
//! The crate is organized around a single pipeline:
//!
//! * [`qgrid`] — discretized coordinate/momentum grids, basis indexing, and
//!   the unitary change of basis between the two representations.
//! * [`pauli`] — weighted Pauli-string algebra and the σ_z expansion of
//!   coordinate, momentum, and polynomial potential operators.
//! * [`models`] — Hamiltonian builders: S^n benchmark models, the ξ ancilla
//!   Hamiltonian, orbifold-lattice Pauli compilation, Wilson loops, and
//!   U(N)/SU(N) generator bases.
//! * [`spectrum`] — dense and matrix-free eigensolvers, degeneracy grouping,
//!   and convergence scans over mass and grid spacing.
//! * [`evolve`] — second-order split-operator time evolution with an exact
//!   propagator oracle and fidelity diagnostics.
//! * [`projection`] — gauge-singlet projection by Haar-weighted group
//!   averaging, with ⟨Ĝ²⟩ diagnostics and Z₂/Z_N toy protocols.
//!
//! All heavy inner loops run through [`kernels`], which provides
//! deterministic chunked reductions. With the `parallel` feature (default)
//! they fan out over rayon; without it the same chunk structure runs
//! sequentially, so results are bit-identical either way.

pub mod error;
pub mod evolve;
pub mod kernels;
pub mod models;
pub mod pauli;
pub mod projection;
pub mod qgrid;
pub mod spectrum;

pub use error::GwError;

/// Default cap on statevector dimension (matrix-free paths).
pub const DEFAULT_DIM_CAP: usize = 1 << 20;

/// Dense-matrix fallbacks are gated to this dimension.
pub const DENSE_DIM_CAP: usize = 1 << 13;
