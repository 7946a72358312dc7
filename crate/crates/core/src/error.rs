use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A covariance or precision matrix could not be factorized even after
    /// jitter escalation.
    #[error("numerical singularity: {0}")]
    Singular(String),

    /// A numerical failure inside a chain, tagged with the sweep it happened in.
    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    /// A failure inside one cross-validation fold.
    #[error("fold t={t}: {source}")]
    Fold {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: column `{column}` not found")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}: {message}")]
    BadCell {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{0}: no data rows")]
    EmptyFile(PathBuf),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File> {
        std::fs::File::open(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })
    }

    /// True when the root cause is a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular(_) => true,
            Error::Sweep { source, .. } | Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
