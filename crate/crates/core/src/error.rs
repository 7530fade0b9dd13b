use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("character {0:?} is not in the alphabet")]
    InputChar(char),
    #[error("level {missing} must be built before level {requested}")]
    HierarchyOrder { requested: usize, missing: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("unsupported document version {got} (expected {expected})")]
    Version { expected: u32, got: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
