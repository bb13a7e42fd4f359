use std::path::PathBuf;

use crate::scenario::ScenarioError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Input(afftop_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(afftop_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} check(s) failed")]
    Verification(usize),
}

impl From<afftop_core::Error> for CliError {
    fn from(e: afftop_core::Error) -> Self {
        use afftop_core::Error::*;
        match e {
            InvalidParameters(_) | SingularInertia(_) | DimensionMismatch(_) | NonPositiveMetric(_) => CliError::Input(e),
            _ => CliError::Numerical(e),
        }
    }
}

impl CliError {
    /// 1 usage or scenario error, 2 numerical failure, 3 failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) | CliError::Usage(_) | CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
