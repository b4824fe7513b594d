use std::path::PathBuf;

use thiserror::Error;

/// Failure of a run, each kind with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("computation failed: {0}")]
    Compute(#[from] lyapdim_core::Error),

    #[error("non-finite value in {table}.csv, column `{column}`, row {row}")]
    NonFinite { table: String, column: String, row: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} identity checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Schema { .. } => 2,
            CliError::Compute(_) | CliError::NonFinite { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
