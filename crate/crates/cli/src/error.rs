use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] kinetic_rknn::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use kinetic_rknn::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidParameter(_)) => 1,
            CliError::Parse { .. } | CliError::Core(E::Parse { .. } | E::InvalidInput(_)) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Io { .. } | CliError::Core(E::TimeTravel { .. } | E::Degenerate(_)) => 4,
        }
    }
}
