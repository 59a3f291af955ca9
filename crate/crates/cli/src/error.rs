use std::path::PathBuf;

use panelsurv_core::Error as CoreError;

use crate::csv_io::CsvError;
use crate::model_file::ModelFileError;

/// Process exit status for a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Validation = 1,
    Numerical = 2,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

/// Whether a core error reflects bad input or a numerical breakdown.
pub fn core_status(e: &CoreError) -> ExitStatus {
    match e {
        CoreError::DimensionMismatch { .. }
        | CoreError::OffGrid { .. }
        | CoreError::InvalidParameter { .. }
        | CoreError::BeyondGrid { .. }
        | CoreError::NoEvents
        | CoreError::NoComparablePairs
        | CoreError::InvalidInput(_) => ExitStatus::Validation,
        CoreError::ZeroLikelihood { .. }
        | CoreError::Internal(_)
        | CoreError::NonFiniteGradient { .. }
        | CoreError::NonFiniteObjective
        | CoreError::NonFinitePrediction { .. }
        | CoreError::Quadrature { .. } => ExitStatus::Numerical,
    }
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Core(e) => core_status(e),
            CliError::Csv(CsvError::Dataset(e)) => core_status(e),
            CliError::ModelFile(ModelFileError::Invalid(e)) => core_status(e),
            CliError::Numerical(_) => ExitStatus::Numerical,
            _ => ExitStatus::Validation,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
