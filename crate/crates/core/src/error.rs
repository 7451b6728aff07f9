//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnseError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("non-finite state at step {step}: {context}")]
    NonFiniteState { step: usize, context: String },
    #[error("grid too large for direct convolution: {points} points (limit {limit})")]
    GridTooLarge { points: usize, limit: usize },
    #[error("config validation failed for key `{key}`: {reason}")]
    ConfigValidation { key: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, SnseError>;
