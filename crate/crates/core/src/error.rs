use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("network invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quantity undefined: {0}")]
    Undefined(&'static str),

    #[error("cohort of {requested} respondents exceeds population of {available}")]
    CohortTooLarge { requested: usize, available: usize },

    #[error("summary layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("empty reference table")]
    EmptyTable,

    #[error("empty posterior")]
    EmptyPosterior,

    #[error("need more than {needed} accepted samples for regression adjustment, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("simulation failed for row seed {seed}: {source}")]
    RowFailed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
