use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value fell outside its legal range.
    #[error("{field} out of {range}: got {value}")]
    OutOfRange {
        field: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position ({x:.3}, {y:.3}) m lies outside the map extent")]
    OutsideMap { x: f64, y: f64 },

    #[error("blockage traces have mismatched time grids")]
    MismatchedTraces,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        SimError::Csv {
            path: path.into(),
            source,
        }
    }
}
