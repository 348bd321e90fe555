//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the benchmark core.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An input value violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Array or file dimensions disagree with what the operation expects.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// A request cannot be satisfied with the given data (e.g. an overlap
    /// target that no plan over the pool can reach).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Unsupported file content (codec, sample rate, version).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed file content.
    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable one-word category used as the CLI's stderr prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "config",
            Error::InvalidInput(_) => "input",
            Error::ShapeMismatch { .. } => "shape",
            Error::Infeasible(_) => "infeasible",
            Error::Unsupported(_) => "unsupported",
            Error::Malformed(_) => "data",
            Error::Io(_) => "io",
            Error::Wav(_) => "io",
            Error::Json(_) => "data",
        }
    }
}
