use alloc::string::String;

use crate::frame::Date;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("column `{name}` has {actual} values, frame has {expected} dates")]
    ColumnLength {
        name: String,
        expected: usize,
        actual: usize,
    },

    #[error("dates are not strictly increasing at position {0}")]
    UnsortedDates(usize),

    #[error("non-positive close {value} at {date}")]
    NonPositivePrice { date: Date, value: f64 },

    #[error("non-positive price {value} at position {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("column `{0}` has no observed values in the fitting range")]
    AllMissing(String),

    #[error("column `{column}` is missing a value at {date}")]
    MissingValue { column: String, date: Date },

    #[error("series of length {len} is too short for lookback {lookback}")]
    SeriesTooShort { len: usize, lookback: usize },

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite {what} in `{block}`")]
    NonFinite { what: &'static str, block: String },

    #[error("column mismatch at position {index}: expected `{expected}`, found `{found}`")]
    ColumnMismatch {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("actual values are constant; R² is undefined")]
    ConstantActual,

    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch:?})")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
