use thiserror::Error;

/// Errors raised by the geometry, loss and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("polygon is not convex")]
    NonConvex,

    #[error("covariance matrix is singular after regularization (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("finite-difference oracle failed: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
