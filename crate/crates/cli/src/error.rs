use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Model(#[from] riscov::Error),

    #[error("{failed} validation check(s) failed")]
    ValidationFailed { failed: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) => 1,
            CliError::Model(riscov::Error::NonConvergence { .. }) => 3,
            CliError::Model(_) => 2,
            CliError::ValidationFailed { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
