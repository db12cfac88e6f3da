use thiserror::Error;

/// Errors reported by the software device.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpuError {
    #[error("device lost")]
    DeviceLost,

    #[error("shader compilation failed for `{label}`:\n{diagnostics}")]
    ShaderCompilation { label: String, diagnostics: String },

    #[error("shader feature unsupported by this device: {0}")]
    Unsupported(String),

    #[error("invalid {object}: {reason}")]
    Validation { object: &'static str, reason: String },

    #[error("shader execution fault: {0}")]
    Execution(String),
}

impl GpuError {
    pub(crate) fn validation(object: &'static str, reason: impl Into<String>) -> Self {
        GpuError::Validation {
            object,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = GpuError> = std::result::Result<T, E>;
