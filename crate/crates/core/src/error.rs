use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, sizes or value ranges that an operation cannot accept.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A model or experiment configuration that violates a constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// An empty region or mask where a nonempty one is required.
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
