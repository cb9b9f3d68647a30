use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. The CLI maps each variant onto an exit code
/// through [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("correlation undefined: column {0} is constant")]
    UndefinedCorrelation(usize),

    #[error("singular design: column {column} ('{name}') is linearly dependent on earlier columns")]
    SingularDesign { column: usize, name: String },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("all {0} replications failed to converge")]
    AllReplicationsFailed(usize),

    #[error("parse error at line {line}, position {position}: {message}")]
    Parse {
        line: usize,
        position: usize,
        message: String,
    },

    #[error("ingestion error at row {row}, column '{column}': {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("study specification: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("study file: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Usage,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ErrorKind::Io,
            Error::SingularDesign { .. }
            | Error::NotConverged(_)
            | Error::AllReplicationsFailed(_)
            | Error::UndefinedCorrelation(_) => ErrorKind::Numerical,
            _ => ErrorKind::Usage,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
