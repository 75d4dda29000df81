use thiserror::Error;

/// Errors raised by the tensor, permutation and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid permutation image {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor with {entries} entries exceeds the capacity limit of {limit}")]
    CapacityExceeded { entries: u128, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not orthogonal (max |UᵀU - I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("blocks of the partition are not contiguous runs; a nonincreasing mu is required")]
    NonContiguousBlocks,
}

pub type Result<T> = std::result::Result<T, Error>;
