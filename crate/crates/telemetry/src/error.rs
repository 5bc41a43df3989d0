use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TelemetryError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding record: {0}")]
    Encode(#[source] serde_json::Error),
    #[error("invalid exclusion policy `{0}` (expected a comma list of complete, unique-worker, survey, or all/none)")]
    Policy(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] teamtime_core::Error),
}
