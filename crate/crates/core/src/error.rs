use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },

    #[error("duplicate unit {0:?}")]
    DuplicateUnit(String),

    #[error("duplicate record for unit {unit:?}, year {year}, type {subsidy_type:?}")]
    DuplicateRecord {
        unit: String,
        year: i32,
        subsidy_type: String,
    },

    #[error("negative amount {amount} for unit {unit:?} in {year}")]
    NegativeAmount { unit: String, year: i32, amount: f64 },

    #[error("non-positive population {population} for unit {unit:?} in {year}")]
    NonPositivePopulation { unit: String, year: i32, population: f64 },

    #[error("conflicting population values for unit {unit:?} in {year}")]
    InconsistentPopulation { unit: String, year: i32 },

    #[error("no common years across units")]
    NoCommonYears,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("need at least {required} curves, got {actual}")]
    TooFewCurves { required: usize, actual: usize },

    #[error("grid mismatch between samples")]
    GridMismatch,

    #[error("units do not match between trajectories and outcomes")]
    UnitMismatch,

    #[error("empty group {0}")]
    EmptyGroup(char),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by a degenerate analysis (a split that leaves
    /// a group empty) rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::EmptyGroup(_))
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config { .. })
    }
}
