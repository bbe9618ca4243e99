//! CLI error taxonomy: validation problems (bad config or arguments, exit
//! code 1) versus runtime failures (engine or I/O errors, exit code 2).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn with_context(self, ctx: &str) -> CliError {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{m} ({ctx})")),
            CliError::Runtime(m) => CliError::Runtime(format!("{m} ({ctx})")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
