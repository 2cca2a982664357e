use std::path::Path;

use morsedyn_core::Error as CoreError;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input file. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Numerical or IO failure while running a stage. Exit code 2.
    #[error("{0}")]
    Runtime(String),
    /// The leaf cap stopped refinement early. Exit code 3. Outputs are still written.
    #[error("{0}")]
    Truncated(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Truncated(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }

    pub fn read(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Validation(format!("cannot read {}: {err}", path.display()))
    }

    pub fn parse(path: &Path, what: &str, err: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: invalid {what}: {err}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numerical(_) => CliError::Runtime(e.to_string()),
            CoreError::Capacity(_) => CliError::Truncated(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
