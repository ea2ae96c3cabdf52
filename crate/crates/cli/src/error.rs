use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, each mapped to a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid input (configuration, files, arguments).
    #[error("{0}")]
    Input(String),
    /// The inputs are well-formed but describe an impossible physical case.
    #[error(transparent)]
    Domain(zeno_core::Error),
    /// A validation check exceeded its tolerance.
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Domain(_) => 3,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }
}

impl From<zeno_core::Error> for CliError {
    fn from(err: zeno_core::Error) -> Self {
        if err.is_domain() {
            CliError::Domain(err)
        } else {
            CliError::Input(err.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
