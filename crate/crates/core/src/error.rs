use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("argument {x} outside interval ({a}, {b})")]
    Domain { x: f64, a: f64, b: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("truncation failed: tail mass {tail:.3e} above tolerance {tol:.3e} at endpoint {endpoint}")]
    Truncation { endpoint: f64, tail: f64, tol: f64 },

    #[error("infinite endpoint; truncate the interval first")]
    InfiniteInterval,

    #[error("no convergence after {iterations} iterations (last change {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("matrix of order {order} exceeds the oracle limit {limit}")]
    Size { order: usize, limit: usize },

    #[error("U22(b,a) is numerically singular (condition {condition:.3e})")]
    ResolventSingular { condition: f64 },

    #[error("resolvent trivial at alpha = 0")]
    ResolventTrivial,

    #[error("routes disagree: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
