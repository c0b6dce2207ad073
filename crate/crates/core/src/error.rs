use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column {column} at row {row}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("non-finite value in column {column} at row {row}")]
    NonFinite { row: usize, column: String },

    #[error("non-binary treatment at row {row}")]
    NonBinaryTreatment { row: usize },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("target mean {m} is outside the open support hull ({lo}, {hi})")]
    Infeasible { m: f64, lo: f64, hi: f64 },

    #[error("positivity violation: q = {q} differs from degenerate propensity {pi}")]
    Positivity { pi: f64, q: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Unsupported(_) => ErrorKind::Config,
            Error::MissingColumn(_)
            | Error::NonNumeric { .. }
            | Error::NonFinite { .. }
            | Error::NonBinaryTreatment { .. }
            | Error::Data(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorKind::Data,
            Error::InvalidDistribution(_) | Error::Infeasible { .. } | Error::Positivity { .. } | Error::Numeric(_) => {
                ErrorKind::Numeric
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
