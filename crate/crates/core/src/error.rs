use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("point not in K: {0}")]
    NotInSpace(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("space mismatch")]
    SpaceMismatch,
    #[error("depth too small: {0}")]
    Depth(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;
