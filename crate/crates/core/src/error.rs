use thiserror::Error;

/// Errors raised by the scoring, routing and calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violated a documented precondition (empty vector, non-finite value,
    /// length mismatch, non-positive density, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A router policy or other configuration value is unusable.
    #[error("configuration error: {0}")]
    Config(String),
    /// A dataset cannot support the requested calibration (missing labels,
    /// missing Teacher predictions, empty set).
    #[error("calibration error: {0}")]
    Calibration(String),
    /// A dataset or artifact line failed schema validation.
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn calibration(msg: impl Into<String>) -> Self {
        Error::Calibration(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
