use std::path::PathBuf;

use bdp_core::BdpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] BdpError),
}

impl CliError {
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Data(_) | CliError::Io { .. } => Self::DATA,
            CliError::Core(e) if e.is_numerical() => Self::NUMERICAL,
            CliError::Core(BdpError::Parse(_) | BdpError::OutOfSupport { .. }) => Self::DATA,
            CliError::Core(_) => Self::USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
