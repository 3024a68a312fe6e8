use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("unknown block `{0}`")]
    UnknownBlock(String),

    #[error("duplicate block name `{0}`")]
    DuplicateBlock(String),

    #[error("backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, ConicError>;
