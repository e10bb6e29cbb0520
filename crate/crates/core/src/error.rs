use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at row {row}, column {column} ('{cell}'): {reason}")]
    Parse {
        row: usize,
        column: String,
        cell: String,
        reason: String,
    },

    #[error("target column {0} not found")]
    MissingTarget(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("node {0} is not a terminal node")]
    NotTerminal(usize),

    #[error("parameter t = {t} outside the recorded flow range [0, {max}]")]
    OutOfRange { t: f64, max: f64 },

    #[error("unknown signal '{0}'")]
    UnknownSignal(String),

    #[error("monte carlo run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
