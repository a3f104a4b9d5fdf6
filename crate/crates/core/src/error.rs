use std::path::PathBuf;

use thiserror::Error;

use crate::units::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data or configuration.
    Input,
    /// Identity closure or other numerical precondition failed.
    Numeric,
    /// File system failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("incompatible dimensions: cannot convert {from} to {to}")]
    IncompatibleUnits { from: Unit, to: Unit },
    #[error("unknown unit tag {0:?}")]
    UnknownUnit(String),

    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("non-numeric cell {value:?} in column {column:?} (row {row})")]
    NonNumeric { column: String, row: usize, value: String },
    #[error("duplicate year {0}")]
    DuplicateYear(i32),
    #[error("non-contiguous years: {prev} followed by {next}")]
    NonContiguousYears { prev: i32, next: i32 },
    #[error("non-positive stock value {value} for {symbol} in {year}")]
    NonPositive { symbol: String, year: i32, value: f64 },
    #[error("empty panel")]
    EmptyPanel,
    #[error("series {symbol} has {got} values, expected {expected}")]
    SeriesLength {
        symbol: String,
        got: usize,
        expected: usize,
    },
    #[error("symbol {0:?} not present in panel")]
    MissingSymbol(String),
    #[error("year {0} outside panel range")]
    YearOutOfRange(i32),
    #[error("invalid interval {t0}..{t1}")]
    InvalidInterval { t0: i32, t1: i32 },

    #[error("invalid identity: {0}")]
    InvalidIdentity(String),
    #[error("closure failure in {year}: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    ClosureFailure { year: i32, residual: f64, tolerance: f64 },
    #[error("non-positive value {value} for factor {factor} in {year}")]
    NonPositiveFactor { factor: String, year: i32, value: f64 },
    #[error("logarithmic mean requires positive arguments, got ({0}, {1})")]
    NonPositiveLogMean(f64, f64),

    #[error("empty member set")]
    EmptyMembers,
    #[error("trend fit needs at least two distinct years, got {0}")]
    TooFewPoints(usize),
    #[error("period {label:?} ({start}-{end}) is outside the assessed span {span_start}-{span_end}")]
    PeriodOutOfSpan {
        label: String,
        start: i32,
        end: i32,
        span_start: i32,
        span_end: i32,
    },
    #[error("periods {0:?} and {1:?} overlap")]
    OverlappingPeriods(String, String),
    #[error("no assessed value for official label {0:?}")]
    LabelMismatch(String),
    #[error("official expected value for {label:?} must be positive, got {value}")]
    NonPositiveExpected { label: String, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ErrorKind::Io,
            Error::ClosureFailure { .. } | Error::NonPositiveFactor { .. } | Error::NonPositiveLogMean(..) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Input,
        }
    }
}
