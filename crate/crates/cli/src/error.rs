use std::path::PathBuf;

use thiserror::Error;
use tfqkd_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name}:{line}: invalid {field}: {message}")]
    Validation {
        source_name: String,
        line: u64,
        field: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Config(_) => 4,
            CliError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::IncompleteData(_) => 2,
                CoreError::Infeasible { .. } => 3,
                CoreError::Configuration(_) => 4,
                _ => 1,
            },
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
