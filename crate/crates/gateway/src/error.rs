use thiserror::Error;

use crate::backend::BackendError;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("student backend failed: {0}")]
    Student(BackendError),
    #[error("teacher backend failed: {0}")]
    Teacher(BackendError),
    #[error(transparent)]
    Config(cascadeflow_core::Error),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no calibration artifact loaded")]
    NoCurve,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
