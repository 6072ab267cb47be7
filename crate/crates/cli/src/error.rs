use bngeom_core::Error as CoreError;
use bngeom_train::TrainError;
use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Io(_) | CoreError::Format(_) => CliError::Io(msg),
            CoreError::DimensionMismatch(_)
            | CoreError::InvalidParameter(_)
            | CoreError::InvalidActivation(_)
            | CoreError::MissingFrozenStats
            | CoreError::EmptyBatch
            | CoreError::EmptySample => CliError::Usage(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Core(c) => c.into(),
            TrainError::InvalidConfig(m) => CliError::Usage(m),
            e @ TrainError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
