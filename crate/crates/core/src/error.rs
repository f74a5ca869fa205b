use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient intraday returns: got {0}, need at least 2")]
    InsufficientReturns(usize),

    #[error("insufficient sample: {available} usable observations, need at least {required}")]
    InsufficientSample { required: usize, available: usize },

    #[error("rank-deficient regressor matrix (column {column} has negligible pivot {pivot:e})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("unstable VAR: companion spectral radius {radius:.10} is not below 1 - 1e-8")]
    Unstable { radius: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("band {label} contains no grid frequencies; increase the number of frequencies")]
    EmptyBand { label: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::EmptyBand { .. } => ErrorKind::Usage,
            Error::RankDeficient { .. } | Error::Unstable { .. } | Error::Numeric(_) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}
