use neumann_rigidity::Error;
use thiserror::Error as ThisError;

/// Command failure, sorted by exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Exit code 2.
    #[error("validation error: {0}")]
    Validation(String),
    /// Exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(Error),
    /// Exit code 4.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidMesh(_) | Error::DimensionMismatch { .. } | Error::InvalidBracket { .. } => {
                CliError::Validation(e.to_string())
            }
            Error::Io(msg) => CliError::Io(msg),
            Error::Format(_) => CliError::Io(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
