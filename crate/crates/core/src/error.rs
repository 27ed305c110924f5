use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation, learning and validation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {what} = {index}, bound {bound}")]
    Bounds {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("registry error: {0}")]
    Registry(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("data integrity error at row {row}: {message}")]
    Integrity { row: usize, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn bounds(what: &'static str, index: usize, bound: usize) -> Self {
        Error::Bounds { what, index, bound }
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::bounds(what, index, bound))
    }
}
