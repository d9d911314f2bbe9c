use neurotopo_core::image::pnm::PnmError;
use neurotopo_core::persistence::PersistenceError;
use neurotopo_core::{ImageError, PipelineError};
use thiserror::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PARAMETER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Input { code: &'static str, message: String },
    #[error("{message}")]
    Parameter { code: &'static str, message: String },
}

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Input {
            code,
            message: message.into(),
        }
    }

    pub fn parameter(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Parameter {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Input { code, .. } | CliError::Parameter { code, .. } => code,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => EXIT_INPUT,
            CliError::Parameter { .. } => EXIT_PARAMETER,
        }
    }
}

impl From<PnmError> for CliError {
    fn from(e: PnmError) -> Self {
        match e {
            PnmError::Io { .. } => CliError::input("unreadable-input", e.to_string()),
            _ => CliError::input("malformed-image", e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::DimensionMismatch(..) => CliError::input("dimension-mismatch", e.to_string()),
            ImageError::EmptyStack | ImageError::EmptyDimensions { .. } | ImageError::BufferLength { .. } => {
                CliError::input("malformed-image", e.to_string())
            }
            _ => CliError::parameter("invalid-parameter", e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Image(inner) => inner.into(),
            PipelineError::Persistence(inner) => inner.into(),
            other => CliError::parameter("invalid-parameter", other.to_string()),
        }
    }
}

impl From<PersistenceError> for CliError {
    fn from(e: PersistenceError) -> Self {
        match e {
            PersistenceError::Image(inner) => inner.into(),
            other => CliError::parameter("invalid-parameter", other.to_string()),
        }
    }
}
