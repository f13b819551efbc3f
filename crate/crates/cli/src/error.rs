use std::path::PathBuf;

use sweep_core::ErrorClass;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sweep_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    /// The acceptance suite ran and some criterion failed.
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const STEP_TOO_LARGE: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const IO: u8 = 5;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => core_exit_code(e),
        }
    }

    /// Short machine-readable status for manifests.
    pub fn status(&self) -> &'static str {
        match self.exit_code() {
            exit::CONFIG => "config-error",
            exit::STEP_TOO_LARGE => "step-too-large",
            exit::SOLVER => "solver-failure",
            _ => "io-error",
        }
    }

    pub fn node(&self) -> Option<usize> {
        match self {
            CliError::Core(e) => e.node(),
            _ => None,
        }
    }
}

pub fn core_exit_code(e: &sweep_core::Error) -> u8 {
    match e.class() {
        ErrorClass::Config => exit::CONFIG,
        ErrorClass::StepTooLarge => exit::STEP_TOO_LARGE,
        ErrorClass::Solver => exit::SOLVER,
    }
}
