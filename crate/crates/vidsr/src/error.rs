use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by tensor operations, data preparation, training and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor did not have the shape an operation requires. The message
    /// names the offending axis so callers can locate the mismatch.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument was structurally valid but semantically out of range.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A network or training configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A checkpoint, manifest or patch store failed to parse or verify.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
