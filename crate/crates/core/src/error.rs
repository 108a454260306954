use thiserror::Error;

/// Errors raised by graph construction, filtering, simulation and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("zero eigenvalue of the Laplacian is not simple (null space dimension {dim})")]
    DegenerateNullSpace { dim: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("global analysis needs uniform R, S and G across nodes: {0}")]
    NonUniform(String),

    #[error("degenerate equilibrium denominator {0}")]
    ZeroDenominator(f64),

    #[error("malformed config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}
