//! CLI error classification and process exit codes.

use mobridge_core::CoreError;

/// Exit code 2: bad input (files, flags, parameter ranges).
/// Exit code 3: internal numeric failure (non-finite results, serialization).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self::Numeric(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Numeric(_) => 3,
        }
    }

    /// Prefix an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Self::Input(msg) => Self::Input(format!("{stage} stage: {msg}")),
            Self::Numeric(msg) => Self::Numeric(format!("{stage} stage: {msg}")),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        Self::Input(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::Input(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    // serde_json refuses non-finite floats, which is how the "every numeric
    // field finite" report invariant is enforced
    fn from(err: serde_json::Error) -> Self {
        Self::Numeric(format!("report serialization: {err}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
