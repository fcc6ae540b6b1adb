use thiserror::Error;

#[derive(Debug, Error)]
pub enum HenonError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("field does not match mesh: {0}")]
    MeshMismatch(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("field is identically zero")]
    ZeroField,
    #[error("field does not change sign")]
    NoSignChange,
}

pub type Result<T> = std::result::Result<T, HenonError>;
