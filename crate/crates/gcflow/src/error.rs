//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("positivity violated: integral of f e^(2u) = {value}")]
    PositivityViolation { value: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type GcResult<T> = Result<T, GcError>;

impl GcError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GcError::Io {
            path: path.into(),
            source,
        }
    }
}
