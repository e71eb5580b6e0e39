use thiserror::Error;

/// Errors raised by the fitting, selection, inference and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A linear system could not be factorized.
    #[error("singular system: {0}")]
    Singular(String),

    /// A model configuration that cannot be evaluated (for example df >= n).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A quantity that cannot be evaluated at the requested point.
    #[error("unevaluable: {0}")]
    Unevaluable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
