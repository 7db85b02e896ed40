use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian at elimination step {0}")]
    SingularJacobian(usize),

    #[error("nonlinearity overflowed (argument above the saturation limit)")]
    Overflow,

    #[error("field is identically zero")]
    ZeroField,

    #[error("invalid bracket: indicator has the same sign at both ends ({lo:e}, {hi:e})")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("branch switch fell back to the constant solution {0}")]
    FellBackToConstant(f64),

    #[error("branch lost at epsilon = {0} (step underflow)")]
    BranchLost(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
