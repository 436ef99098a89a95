use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or malformed input; exit code 1.
    #[error("{0}")]
    Input(String),
    /// The optimizer or renderer could not produce a result; exit code 2.
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Core(#[from] eyeshift::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(1),
            CliError::Numerical(_) => ExitCode::from(2),
            CliError::Core(e) if e.is_numerical() => ExitCode::from(2),
            CliError::Core(_) => ExitCode::from(1),
        }
    }
}
