use thiserror::Error;

/// Errors produced by the monitoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    ParseCell {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("non-finite value at series {series}, time {time}")]
    NonFinite { series: usize, time: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("rolling window holds {have} of {need} observations")]
    WindowNotFull { have: usize, need: usize },

    #[error("degenerate spectrum: eigenvalue trace is zero")]
    DegenerateSpectrum,

    #[error("zero eigenvalue at position {0}")]
    ZeroEigenvalue(usize),

    #[error("out-of-order time stamp: expected t = {expected}, got t = {actual}")]
    OutOfOrder { expected: usize, actual: usize },

    #[error("replication {rep} (seed {seed}) failed: {source}")]
    Replication {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error stems from malformed input rather than a numeric
    /// or I/O failure at run time.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::EmptyInput
            | Error::RaggedRow { .. }
            | Error::ParseCell { .. }
            | Error::NonFinite { .. }
            | Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::OutOfOrder { .. } => true,
            Error::Replication { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
