use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("{failed} of {total} Monte-Carlo replicates failed after retries: {first}")]
    Replicates {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the failure is numerical (parameter estimation) rather than
    /// a problem with the supplied data or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Estimation(_) | Error::Replicates { .. })
    }
}
