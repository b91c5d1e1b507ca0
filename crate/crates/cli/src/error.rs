//! CLI-facing error type with stable exit codes.

/// Exit code 0 is success, 1 a runtime failure, 2 a usage, config or input
/// problem.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation, config file, or input data (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Failure while running an otherwise valid job (exit 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Setup-phase errors (loading inputs, validating configs) are usage errors.
pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Mid-run errors (diverged training, failed writes) are runtime errors.
pub fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

impl From<dcnn_core::Error> for CliError {
    fn from(err: dcnn_core::Error) -> CliError {
        CliError::Runtime(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
