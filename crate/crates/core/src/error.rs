use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mapping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point is at the sensor origin; beam angle undefined")]
    ZeroRange,
    #[error("point line is empty")]
    EmptyLine,
    #[error("point line has {0} points, need at least 2")]
    LineTooShort(usize),
    #[error("degenerate input for plane fit: {0}")]
    DegenerateInput(&'static str),
    #[error("no ceiling plane found")]
    NoCeilingFound,
    #[error("timestamp {t} outside trajectory span [{start}, {end}]")]
    TimestampOutOfRange { t: f64, start: f64, end: f64 },
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("sensor pose lies inside scene geometry")]
    PoseInsideGeometry,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("point sets differ: {0}")]
    Mismatch(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
