use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pole at s = {at}")]
    Pole { at: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("functional-equation datum has degree {degree}, expected 2")]
    NotDegreeTwo { degree: String },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("Laurent extraction failed: {0}")]
    Extraction(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
