use thiserror::Error;

use crate::distributions::Family;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {family} parameter `{name}` = {value}: must be {requirement}")]
    InvalidParameter {
        family: Family,
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dataset `{0}` is empty")]
    EmptyDataset(String),
    #[error("dataset `{0}` is degenerate (zero sample variance)")]
    DegenerateData(String),
    #[error("sample {value} lies outside the support of the {family} family")]
    Support { family: Family, value: f64 },
    #[error("unbounded optimum: with zero human waiting cost the robot should wait indefinitely")]
    UnboundedOptimum,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
