use thiserror::Error;

/// Errors raised by fraclab operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent arguments (dimension mismatch, bad parameters).
    #[error("invalid input: {0}")]
    Input(String),
    /// The argument lies outside the domain of a partial map.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition on the data does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
