//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter combination.
    #[error("configuration: {0}")]
    Config(String),
    /// Inconsistent dimensions between components.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Numerical failure (singular system, non-PSD matrix, ...).
    #[error("numerical: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
