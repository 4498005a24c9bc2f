use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] zosketch::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 I/O, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        use zosketch::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Core(e) => match e {
                E::Io { .. } | E::Parse { .. } | E::Format(_) | E::Json(_) => 3,
                E::Numeric(_) => 4,
                _ => 2,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
