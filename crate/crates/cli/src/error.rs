use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] twophase::Error),
}

impl CliError {
    /// 2 usage, 3 data, 4 numeric or domain.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
