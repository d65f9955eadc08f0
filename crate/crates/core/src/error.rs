//! Shared error type for the whole toolkit.

/// Errors produced by solvers, builders and simulators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on user-supplied data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A memory or cost guard refused the request.
    #[error("resource cap exceeded for {what}: needs {needed}, cap is {cap}")]
    ResourceCap {
        what: String,
        needed: u64,
        cap: u64,
    },

    /// The feature is defined but deliberately not implemented for this model.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
