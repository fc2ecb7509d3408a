use alloc::string::String;
use core::fmt;

use crate::frame::Date;

/// Non-fatal conditions surfaced by operations that keep going.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// A bar whose low/high do not bracket open and close, or with negative volume.
    OhlcViolation { date: Date, detail: String },
    /// Previous close was zero, so the percentage return is missing.
    ZeroPrice { date: Date },
    /// Fewer than two rows where both columns are observed.
    InsufficientOverlap { a: String, b: String, n: usize },
    /// Projection stopped early because the model produced a non-finite value.
    NonFinitePrediction { step: usize },
    /// Projection stopped early because a synthetic row could not be featurized.
    ProjectionStopped { step: usize, detail: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::OhlcViolation { date, detail } => {
                write!(f, "OHLC sanity violation on {date}: {detail}")
            }
            Warning::ZeroPrice { date } => {
                write!(f, "zero previous close before {date}; pct_return left missing")
            }
            Warning::InsufficientOverlap { a, b, n } => write!(
                f,
                "only {n} overlapping observations for ({a}, {b}); correlation left missing"
            ),
            Warning::NonFinitePrediction { step } => {
                write!(f, "non-finite prediction at projection step {step}; path truncated")
            }
            Warning::ProjectionStopped { step, detail } => {
                write!(f, "projection stopped at step {step}: {detail}")
            }
        }
    }
}
