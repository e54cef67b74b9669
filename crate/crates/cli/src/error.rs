use hgp_core::{GeoJsonError, InferenceError, MetricError};
use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Geometry(String),
    #[error("{0}")]
    Sampler(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Sampler(_) => 4,
            CliError::Mismatch(_) => 5,
            CliError::Unsupported(_) => 6,
        }
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        CliError::Parse(msg.into())
    }
}

impl From<GeoJsonError> for CliError {
    fn from(e: GeoJsonError) -> Self {
        if e.is_geometry() {
            CliError::Geometry(e.to_string())
        } else {
            CliError::Parse(e.to_string())
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Geometry(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        let msg = e.to_string();
        match e {
            InferenceError::InvalidModel(_) => CliError::Parse(msg),
            InferenceError::FingerprintMismatch(..) => CliError::Mismatch(msg),
            InferenceError::UnsupportedPrediction(_) => CliError::Unsupported(msg),
            InferenceError::Geometry(_)
            | InferenceError::Metric(_)
            | InferenceError::Areal(_)
            | InferenceError::PhiPrior(_) => CliError::Geometry(msg),
            InferenceError::NonPositiveOffset { .. }
            | InferenceError::Initialization { .. }
            | InferenceError::Covariance(_)
            | InferenceError::Diagnostics(_) => CliError::Sampler(msg),
        }
    }
}
