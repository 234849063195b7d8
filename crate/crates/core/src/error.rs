use std::path::PathBuf;

use crate::delay::DelayError;
use crate::env::EnvError;
use crate::forecast::ForecastError;
use crate::grid::CaseError;
use crate::marl::MarlError;
use crate::powerflow::PowerFlowError;

/// Crate-level error. [`Error::exit_code`] maps it onto the CLI contract:
/// 2 for configuration/input problems, 3 for numerical failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("case: {0}")]
    Case(#[from] CaseError),
    #[error("power flow: {0}")]
    PowerFlow(#[from] PowerFlowError),
    #[error("forecast: {0}")]
    Forecast(#[from] ForecastError),
    #[error("delay model: {0}")]
    Delay(#[from] DelayError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("training: {0}")]
    Marl(#[from] MarlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Numerical(String),
    #[error("delay index {index}: {source}")]
    DelayJob {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Case(_)
            | Error::Io { .. }
            | Error::Delay(_)
            | Error::Forecast(_) => 2,
            Error::Env(EnvError::Config(_) | EnvError::Profile(_)) => 2,
            Error::Marl(
                MarlError::Dimension { .. }
                | MarlError::Shape(_)
                | MarlError::Config(_)
                | MarlError::Checkpoint(_)
                | MarlError::Env(EnvError::Config(_) | EnvError::Profile(_)),
            ) => 2,
            Error::DelayJob { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
