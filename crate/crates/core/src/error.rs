use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate series name `{0}`")]
    DuplicateName(String),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("dates must be strictly increasing (at {0})")]
    UnorderedDates(NaiveDate),
    #[error("no dates common to all series")]
    EmptyOverlap,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-positive state {value} at index {index} for a positive-state model")]
    NonPositiveState { index: usize, value: f64 },
    #[error("non-finite value in input: {0}")]
    NonFinite(String),
    #[error("input/output error: {0}")]
    Io(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("model specification: {0}")]
    Model(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
