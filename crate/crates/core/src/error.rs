use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an out-of-range or inconsistent argument.
    #[error("argument error: {0}")]
    Argument(String),

    /// Input data violated a documented invariant (Hermitian symmetry, cone membership, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A problem or grid configuration is outside the supported envelope.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Two grid objects were combined that do not live on the same lattice.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An inner solve failed in a way that cannot be reported as a non-converged result.
    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn configuration(msg: impl Into<String>) -> Error {
    Error::Configuration(msg.into())
}
