use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no velocity field for coordinate {0}")]
    MissingField(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("unsupported test function for analytic oracle: {0}")]
    UnsupportedOracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
