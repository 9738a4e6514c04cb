use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid controller: {0}")]
    InvalidController(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A cost, derivative or objective evaluated to NaN or infinity.
    #[error("non-finite {what} at stage {stage}, grid index {index} (y = {y}, u = {u}): {value}")]
    NonFinite {
        what: &'static str,
        stage: usize,
        index: usize,
        y: f64,
        u: f64,
        value: f64,
    },

    #[error("function returned {value} at u = {u}")]
    NonFiniteFunction { u: f64, value: f64 },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("could not parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than numerics or I/O.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_) | Error::InvalidController(_) | Error::InvalidConfig(_) | Error::Parse { .. }
        )
    }
}
