//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Config file could not be read or parsed.
    #[error("config: {0}")]
    Config(String),
    /// A structural invariant of the topology or parameters is violated.
    #[error("validation: {0}")]
    Validation(String),
    /// Numerical failure (factorization, non-finite input).
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (config/validation) as
    /// opposed to runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Validation(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
