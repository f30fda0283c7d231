use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("graph validation failed: {0}")]
    Validation(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("adversary produced delay {delay} outside (0, 1]")]
    InvalidDelay { delay: f64 },

    #[error("protocol invariant violated: {0}")]
    Invariant(String),

    #[error("replay diverged at record {index}: expected {expected}, regenerated {actual}")]
    ReplayMismatch {
        index: usize,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
