//! Allocation-only core of the `tsf` forecasting toolkit.
//!
//! Everything here is pure computation over in-memory values: dated frames,
//! technical indicators, Min-Max scaling and windowing, a two-layer LSTM with
//! hand-written backpropagation through time, Adam, the training loop,
//! evaluation and recursive projection, and Integrated Gradients.
//!
//! File formats, CSV parsing and the command line live in the `tsf` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod indicators;
pub mod neural;
pub mod preprocess;
pub mod rng;
pub mod trainer;
pub mod warning;

pub use crate::error::{Error, Result};
pub use crate::frame::{Date, FundamentalsRecord, PriceBar, SeriesFrame};
pub use crate::warning::Warning;

/// Missing-value sentinel used inside frames.
pub const MISSING: f64 = f64::NAN;

/// `true` when `x` is the missing-value sentinel.
#[inline]
pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}
