use std::fmt;
use std::process::ExitCode;

use cascadeflow_core::Error as CoreError;
use cascadeflow_gateway::pseudo::PseudoLabelSource;
use cascadeflow_gateway::{BackendError, GatewayError, PseudoLabelError};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Backend(m) => write!(f, "backend error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Config(_) => CliError::Usage(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(err: BackendError) -> Self {
        CliError::Backend(err.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(err: GatewayError) -> Self {
        match err {
            GatewayError::Student(_) | GatewayError::Teacher(_) | GatewayError::Io(_) => {
                CliError::Backend(err.to_string())
            }
            GatewayError::Config(e) => e.into(),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<PseudoLabelError> for CliError {
    fn from(err: PseudoLabelError) -> Self {
        match err.source {
            PseudoLabelSource::Teacher { .. } | PseudoLabelSource::Open(_) => {
                CliError::Backend(err.to_string())
            }
            PseudoLabelSource::Input { .. } | PseudoLabelSource::Io(_) => {
                CliError::Data(err.to_string())
            }
        }
    }
}

pub fn io_error(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {err}", path.display()))
}
