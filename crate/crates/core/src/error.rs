use thiserror::Error;

/// Errors produced anywhere in the compression pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid predictor state: {0}")]
    InvalidState(String),

    #[error("invalid step size {0} (must be finite and > 0)")]
    InvalidStep(f64),

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("frame decode error: {0}")]
    Decode(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
