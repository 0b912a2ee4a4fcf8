use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "martensite band calibration failed: achieved fraction {achieved:.4}, target {target:.4}"
    )]
    Calibration { achieved: f64, target: f64 },

    #[error("invalid microstructure input: {0}")]
    Microstructure(String),

    #[error("{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error(
        "non-finite stress in element {element}, slip system {system} (tau/g = {ratio:e})"
    )]
    NonFiniteStress {
        element: usize,
        system: usize,
        ratio: f64,
    },

    #[error("non-positive Jacobian {det:e} in element {element}")]
    SingularJacobian { element: usize, det: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("phase {0} has no elements")]
    EmptyPhase(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// One configuration problem, located when the key appears in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: `{}`: {}", self.field, self.message),
            None => write!(f, "config: `{}`: {}", self.field, self.message),
        }
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
