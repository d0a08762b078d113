use thiserror::Error;

use crate::numerics::ValueWithError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical budget was exhausted before the requested tolerance was met.
    /// Carries the best estimate obtained so far.
    #[error("numerical failure: {message} (best estimate {best})")]
    Numerical {
        message: String,
        best: ValueWithError,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
