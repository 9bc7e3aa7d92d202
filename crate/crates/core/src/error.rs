use thiserror::Error;

/// Errors raised by the optimization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (residual {residual:e})")]
    CgNotConverged {
        iterations: usize,
        residual: f64,
        /// Last iterate, still usable as a truncated solution.
        last_iterate: Vec<f64>,
    },

    #[error("conjugate gradient hit non-positive curvature {curvature:e} at iteration {iteration}")]
    CgBreakdown {
        iteration: usize,
        curvature: f64,
        last_iterate: Vec<f64>,
    },

    #[error("iterative eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("size {size} exceeds the dense guard of {limit}")]
    GuardExceeded { size: usize, limit: usize },

    #[error("metric `{0}` is not available for this problem")]
    UnknownMetric(String),

    #[error("rank assumption violated: {0}")]
    RankDeficient(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
