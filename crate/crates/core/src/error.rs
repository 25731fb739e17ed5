use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },

    #[error("recording contains no RR intervals")]
    EmptyRecording,

    #[error("line {line}: RR interval {value} is not positive")]
    NonPositiveInterval { line: usize, value: f64 },

    #[error("invalid RR series: {0}")]
    InvalidSeries(String),

    #[error("data quality too poor: {replaced} of {total} beats needed replacement (limit 20%)")]
    DataQuality { replaced: usize, total: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
