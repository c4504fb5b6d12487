//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by grid, solver, and projection operations.
#[derive(Debug, Error)]
pub enum GwError {
    #[error("axis {axis} is in the {found} representation, expected {expected}")]
    RepresentationMismatch {
        axis: usize,
        expected: &'static str,
        found: &'static str,
    },

    #[error("state vectors live on different bases")]
    BasisMismatch,

    #[error("dimension {dim} exceeds cap {cap}")]
    DimCapExceeded { dim: usize, cap: usize },

    #[error("qubit offset {offset} + {width} exceeds operator width {qubit_count}")]
    OffsetOutOfRange {
        offset: usize,
        width: usize,
        qubit_count: usize,
    },

    #[error("Pauli sums act on different qubit counts ({left} vs {right})")]
    QubitCountMismatch { left: usize, right: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

impl GwError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GwError::InvalidArgument(msg.into())
    }
}
