use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("return period {return_period} must divide scenario count {scenarios}")]
    ReturnPeriod { scenarios: usize, return_period: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("lp backend returned {status:?}: {context}")]
    Solver { status: LpStatus, context: String },

    #[error(
        "cut from iteration {iteration} repeats the tail of iteration {previous} \
         (violation {violation:e}); aborting to avoid cycling"
    )]
    RepeatedCut {
        iteration: usize,
        previous: usize,
        violation: f64,
    },

    #[error("verification requires a {expected} result, got {actual}")]
    NotVerifiable {
        expected: &'static str,
        actual: String,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
