//! CLI error type with the documented exit-code mapping:
//! 0 success, 2 config/validation error, 3 numerical failure, 1 I/O.

use risksynth::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration / input files.
    Config(String),
    /// Model validation failed (itemized report in the message).
    Validation(String),
    /// Numerical failure during synthesis or evaluation.
    Numerical(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Dimension(_)
            | CoreError::InvalidParameter(_)
            | CoreError::OutOfBox { .. }
            | CoreError::Csv { .. } => CliError::Config(e.to_string()),
            CoreError::Validation(_) => CliError::Validation(e.to_string()),
            CoreError::NearSingular { .. }
            | CoreError::Singular { .. }
            | CoreError::UnboundedImpact { .. }
            | CoreError::SubsetGuard { .. }
            | CoreError::NonFinite(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
