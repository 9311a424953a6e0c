use thiserror::Error;

/// Errors raised by the testing toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (cutoff ladders, scenario specs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was attempted in a state that does not allow it.
    #[error("state error: {0}")]
    State(String),

    /// Malformed input data; the message names the offending line.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
