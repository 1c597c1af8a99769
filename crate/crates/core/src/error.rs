use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced (or would produce) a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An estimator could not produce a meaningful value for the given samples.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Too many independent rounds failed for an aggregate estimate.
    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    /// A lookup key is absent from a table.
    #[error("not found: {0}")]
    NotFound(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
