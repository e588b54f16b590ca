use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QrmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("bisection bracket [{lo}, {hi}] does not straddle the target level")]
    Bracket { lo: f64, hi: f64 },

    #[error("training diverged at step {step}: objective {value} exceeds limit {limit}")]
    Divergence { step: usize, value: f64, limit: f64 },
}

pub type Result<T, E = QrmError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QrmError::Domain(msg.into()))
}
