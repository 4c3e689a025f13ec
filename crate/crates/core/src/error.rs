use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "no convergence after {iterations} iterations \
         (projected gradient {projected_gradient:e}, objective {objective:e})"
    )]
    ConvergenceFailure {
        iterations: u64,
        projected_gradient: f64,
        objective: f64,
    },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
