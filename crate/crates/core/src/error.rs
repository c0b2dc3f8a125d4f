use std::path::PathBuf;

use thiserror::Error;

/// Which stage of a run an error belongs to. Drives the CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Compute,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("genome {accession}: empty after filter")]
    EmptyAfterFilter { accession: String },

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("aligning {a} vs {b}: {message}")]
    PairAlignment { a: String, b: String, message: String },

    #[error("similarity cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("missing similarity record for pair ({a}, {b})")]
    MissingPair { a: String, b: String },

    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),

    #[error("sequence {0} is not covered by any gene class")]
    Uncovered(String),

    #[error("{0}")]
    Compute(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Threshold(_) => ErrorKind::Config,
            Error::Io { .. } | Error::Parse { .. } | Error::Input(_) | Error::EmptyAfterFilter { .. } => {
                ErrorKind::Input
            }
            Error::Alignment(_)
            | Error::PairAlignment { .. }
            | Error::Cache { .. }
            | Error::MissingPair { .. }
            | Error::Uncovered(_)
            | Error::Compute(_) => ErrorKind::Compute,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
