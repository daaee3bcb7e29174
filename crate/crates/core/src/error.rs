use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("non-nested spaces: {0}")]
    Nesting(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("admissibility violation: {0}")]
    Admissibility(String),

    #[error("eigensolver did not converge after {iterations} restarts ({converged}/{wanted} pairs)")]
    NoConvergence {
        iterations: usize,
        converged: usize,
        wanted: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular Schur complement in constraint solve (rank-deficient constraints)")]
    SingularSchur,

    #[error("POD online system not SPD at node {node}")]
    PodOnline { node: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
