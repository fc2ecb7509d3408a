//! One-step-ahead test scoring in price units and recursive projection
//! past the end of the data.

use alloc::borrow::ToOwned;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, Days, Weekday};

use crate::error::{Error, Result};
use crate::frame::{Date, SeriesFrame};
use crate::indicators::{compute_features, IndicatorConfig};
use crate::is_missing;
use crate::neural::tensor::Tensor3;
use crate::preprocess::WindowedDataset;
use crate::trainer::{predict_batch, Checkpoint};
use crate::warning::Warning;

/// `1 - SSE / SST` with a two-pass mean.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            what: "predicted length",
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.len() < 2 {
        return Err(Error::invalid("actual", "need at least two observations"));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantActual);
    }
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub r2: f64,
    pub dates: Vec<Date>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    /// `actual - predicted`.
    pub residuals: Vec<f64>,
}

impl EvaluationResult {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Scores every test window against its true next value. Inputs are always
/// the historical windows; predictions are never fed back.
pub fn evaluate(checkpoint: &Checkpoint, test: &WindowedDataset) -> Result<EvaluationResult> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    checkpoint.check_manifest(&test.feature_names)?;
    if test.target_column != checkpoint.target_column {
        return Err(Error::ColumnMismatch {
            index: 0,
            expected: checkpoint.target_column.clone(),
            found: test.target_column.clone(),
        });
    }
    let range = checkpoint.scaler.column(&checkpoint.target_column)?;
    let scaled = predict_batch(checkpoint, &test.inputs)?;
    let predicted: Vec<f64> = scaled.iter().map(|&y| range.unscale(y)).collect();
    let actual: Vec<f64> = test.targets.iter().map(|&y| range.unscale(y)).collect();
    let r2 = r2_score(&actual, &predicted)?;
    let residuals = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
    Ok(EvaluationResult {
        r2,
        dates: test.sample_dates.clone(),
        actual,
        predicted,
        residuals,
    })
}

/// Next Monday-to-Friday date. No holiday calendar.
pub fn next_trading_day(date: Date) -> Date {
    let step = match date.weekday() {
        Weekday::Fri => 3,
        Weekday::Sat => 2,
        _ => 1,
    };
    date + Days::new(step)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastPath {
    pub dates: Vec<Date>,
    /// Projected target values in price units.
    pub values: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl ForecastPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Projects `horizon` steps past the end of `history` by feeding each
/// prediction back in.
///
/// `history` is the unscaled feature frame the checkpoint was trained on
/// (manifest columns plus whatever raw columns the features came from) and
/// `indicators` the config that produced it. Each synthetic row copies the
/// predicted value into the target and, when the target is `close`, into
/// `open`, `high` and `low`; every other raw column keeps its last value.
/// Engineered columns are then recomputed over the extended raw series.
/// Features still missing on a synthetic row carry the previous row's value.
///
/// A non-finite prediction, or one the indicators reject, ends the path
/// early with a warning.
pub fn forecast_recursive(
    checkpoint: &Checkpoint,
    history: &SeriesFrame,
    indicators: &IndicatorConfig,
    horizon: usize,
) -> Result<ForecastPath> {
    checkpoint.validate()?;
    let lookback = checkpoint.lookback;
    if history.len() < lookback {
        return Err(Error::SeriesTooShort {
            len: history.len(),
            lookback,
        });
    }
    let manifest = history.select(&checkpoint.manifest)?;
    let mut path = ForecastPath::default();
    if horizon == 0 {
        return Ok(path);
    }
    if let Some((column, date)) = manifest.slice_rows(manifest.len() - lookback..manifest.len()).first_missing() {
        return Err(Error::MissingValue {
            column: column.to_owned(),
            date,
        });
    }

    let engineered = indicators.feature_names();
    let raw_names: Vec<String> = history
        .column_names()
        .iter()
        .filter(|n| !engineered.contains(n))
        .cloned()
        .collect();
    let mut raw = history.select(&raw_names)?;
    let target = checkpoint.target_column.as_str();
    let target_range = checkpoint.scaler.column(target)?;
    let width = checkpoint.manifest.len();

    let scale_row = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&checkpoint.scaler.columns)
            .map(|(&v, r)| r.scale(v))
            .collect()
    };
    let mut window: VecDeque<Vec<f64>> = (manifest.len() - lookback..manifest.len())
        .map(|i| scale_row(&manifest.row(i)))
        .collect();
    let mut last_unscaled = manifest.row(manifest.len() - 1);
    let mut date = *history.dates().last().expect("history has at least lookback rows");

    for step in 0..horizon {
        let flat: Vec<f64> = window.iter().flatten().copied().collect();
        let x = Tensor3::from_vec(1, lookback, width, flat)?;
        let value = target_range.unscale(predict_batch(checkpoint, &x)?[0]);
        if !value.is_finite() {
            path.warnings.push(Warning::NonFinitePrediction { step });
            break;
        }
        date = next_trading_day(date);

        let mut raw_row = raw.row(raw.len() - 1);
        for (c, name) in raw_names.iter().enumerate() {
            let mirrors_close = target == "close" && matches!(name.as_str(), "open" | "high" | "low");
            if name == target || mirrors_close {
                raw_row[c] = value;
            }
        }
        raw.push_row(date, &raw_row)?;

        let next = if engineered.is_empty() {
            raw.select(&checkpoint.manifest)?.row(raw.len() - 1)
        } else {
            match compute_features(&raw, indicators) {
                Ok((full, _)) => full.select(&checkpoint.manifest)?.row(raw.len() - 1),
                Err(Error::NonPositivePrice { date, value }) => {
                    path.warnings.push(Warning::ProjectionStopped {
                        step,
                        detail: format!("non-positive projected close {value} at {date}"),
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
        };
        let next: Vec<f64> = next
            .iter()
            .zip(&last_unscaled)
            .map(|(&v, &prev)| if is_missing(v) { prev } else { v })
            .collect();

        path.dates.push(date);
        path.values.push(value);
        window.pop_front();
        window.push_back(scale_row(&next));
        last_unscaled = next;
    }
    Ok(path)
}
