use std::path::{Path, PathBuf};

use bubblescope_core::calibrate::CalibrateError;
use bubblescope_core::filter::FilterError;
use bubblescope_core::lppls::ModelError;
use bubblescope_core::regression::RegressionError;
use bubblescope_core::series::SeriesError;
use bubblescope_core::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    /// Prefixes a validation or numeric message with the offending input.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
            io => io,
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::Io { path, message } => CliError::Io {
                path: path.into(),
                message,
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Singular | ModelError::PastCriticalTime { .. } => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CalibrateError> for CliError {
    fn from(e: CalibrateError) -> Self {
        match e {
            CalibrateError::Series(s) => s.into(),
            CalibrateError::Model(m) => m.into(),
            CalibrateError::Config(m) => CliError::Validation(m),
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::Series(s) => s.into(),
            FilterError::Calibrate(c) => c.into(),
            FilterError::CriticalTimeBeforeStart { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RegressionError> for CliError {
    fn from(e: RegressionError) -> Self {
        match e {
            RegressionError::TooShort { .. }
            | RegressionError::SpanMismatch(_)
            | RegressionError::InvalidInput(_) => CliError::Validation(e.to_string()),
            RegressionError::RankDeficient
            | RegressionError::ZeroVariance
            | RegressionError::Degenerate(_)
            | RegressionError::OrderAtLeastTwo => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            SimError::Series(s) => s.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}
