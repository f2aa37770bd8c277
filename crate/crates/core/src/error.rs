use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("index ({row}, {col}) out of bounds for {height}x{width} grid")]
    Index {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("category error: {0}")]
    Category(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("step {t} out of range 1..={max}")]
    Step { t: usize, max: usize },
    #[error("distribution error: {0}")]
    Distribution(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("instance error: {0}")]
    Instance(String),
    #[error("retrieval error: no assets for category {0}")]
    Retrieval(usize),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("condition kind {requested} not supported by checkpoint trained in mode {mode}")]
    ModeMismatch { requested: String, mode: String },
    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png error: {0}")]
    Png(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) => 2,
            Error::Checkpoint(_) | Error::ModeMismatch { .. } => 4,
            _ => 3,
        }
    }
}
