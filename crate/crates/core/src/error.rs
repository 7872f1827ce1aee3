use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    /// A record in a data file could not be used. `line` is 1-based.
    #[error("{context}, line {line}: {message}")]
    Record {
        context: String,
        line: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale vocabulary: term {0:?} does not occur in the corpus")]
    StaleVocabulary(String),

    #[error("degenerate marginals: both annotators use a single identical class but disagree")]
    DegenerateMarginals,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            context: context.into(),
            line,
            message: message.into(),
        }
    }
}
