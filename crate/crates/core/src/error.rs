use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Cholesky factorization failed even with the largest jitter on the ladder.
    #[error("covariance factorization failed (last jitter tried: {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The bandit was driven out of its draw/update alternation.
    #[error("bandit protocol violation: {0}")]
    Protocol(String),

    #[error("objective evaluation failed at iteration {iteration}: {message}")]
    Objective { iteration: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn dim_mismatch(expected: usize, got: usize) -> Error {
    Error::InvalidInput(format!("dimension mismatch: expected {expected}, got {got}"))
}
