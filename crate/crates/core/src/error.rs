use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (zero-norm field, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Scenario coefficient generation could not meet its field-statistic targets.
    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("estimation failed: {message} (condition number {condition_number:.3e})")]
    Estimation { message: String, condition_number: f64 },

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
