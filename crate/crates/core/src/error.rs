use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested scale lies below what the finite sample can resolve.
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
