//! Min-Max scaling fitted on the training span, sliding-window dataset
//! construction and the chronological train/test split.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::frame::{Date, SeriesFrame};
use crate::is_missing;
use crate::neural::tensor::Tensor3;

/// Affine range of one column.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// `(x - min) / (max - min)`; a degenerate range maps everything to 0.
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span == 0.0 {
            0.0
        } else {
            (x - self.min) / span
        }
    }

    /// Inverse of [`ColumnRange::scale`]; a degenerate range inverts to `min`.
    #[inline]
    pub fn unscale(&self, y: f64) -> f64 {
        let span = self.max - self.min;
        if span == 0.0 {
            self.min
        } else {
            y * span + self.min
        }
    }
}

/// Per-column Min-Max parameters, in feature-manifest order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerParams {
    pub columns: Vec<ColumnRange>,
}

impl ScalerParams {
    pub fn column(&self, name: &str) -> Result<&ColumnRange> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    fn check_alignment(&self, frame: &SeriesFrame) -> Result<()> {
        if frame.n_columns() != self.columns.len() {
            return Err(Error::Shape {
                what: "scaler columns",
                expected: self.columns.len(),
                actual: frame.n_columns(),
            });
        }
        for (index, (found, expected)) in frame.column_names().iter().zip(&self.columns).enumerate() {
            if *found != expected.name {
                return Err(Error::ColumnMismatch {
                    index,
                    expected: expected.name.clone(),
                    found: found.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Chronological split settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub lookback: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            lookback: 60,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", "must lie strictly between 0 and 1"));
        }
        if self.lookback < 1 {
            return Err(Error::invalid("lookback", "must be >= 1"));
        }
        Ok(())
    }

    /// Number of training samples out of `n_samples`: `floor(fraction * n)`,
    /// kept within `1..n` so neither partition is empty.
    pub fn train_samples(&self, n_samples: usize) -> usize {
        // The epsilon absorbs representation error such as 0.8 * 40 = 32.000000000000004.
        let k = libm::floor(self.train_fraction * n_samples as f64 + 1e-9) as usize;
        k.clamp(1, n_samples.saturating_sub(1).max(1))
    }

    /// Frame rows whose values can reach a training sample (its inputs or
    /// its target). The scaler is fitted on exactly these rows.
    pub fn train_rows(&self, series_len: usize) -> Result<Range<usize>> {
        self.validate()?;
        if series_len <= self.lookback {
            return Err(Error::SeriesTooShort {
                len: series_len,
                lookback: self.lookback,
            });
        }
        let n_samples = series_len - self.lookback;
        Ok(0..self.lookback + self.train_samples(n_samples))
    }
}

/// Per-column min/max over `rows` only; missing values are skipped.
pub fn fit_minmax(frame: &SeriesFrame, rows: Range<usize>) -> Result<ScalerParams> {
    if rows.is_empty() {
        return Err(Error::Empty("fitting row range"));
    }
    if rows.end > frame.len() {
        return Err(Error::Shape {
            what: "fitting row range end",
            expected: frame.len(),
            actual: rows.end,
        });
    }
    let columns = frame
        .columns()
        .map(|(name, col)| {
            let observed = col[rows.clone()].iter().copied().filter(|v| !is_missing(*v));
            let (min, max) = observed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            if min > max {
                return Err(Error::AllMissing(name.to_owned()));
            }
            Ok(ColumnRange {
                name: name.to_owned(),
                min,
                max,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScalerParams { columns })
}

fn map_columns(frame: &SeriesFrame, params: &ScalerParams, f: impl Fn(&ColumnRange, f64) -> f64) -> Result<SeriesFrame> {
    params.check_alignment(frame)?;
    let columns = frame
        .columns()
        .zip(&params.columns)
        .map(|((name, col), range)| (name.to_owned(), col.iter().map(|&v| f(range, v)).collect()))
        .collect();
    SeriesFrame::new(frame.dates().to_vec(), columns)
}

pub fn transform(frame: &SeriesFrame, params: &ScalerParams) -> Result<SeriesFrame> {
    map_columns(frame, params, ColumnRange::scale)
}

pub fn inverse_transform(frame: &SeriesFrame, params: &ScalerParams) -> Result<SeriesFrame> {
    map_columns(frame, params, ColumnRange::unscale)
}

/// Supervised samples cut from a scaled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `n_samples x lookback x n_features`.
    pub inputs: Tensor3,
    /// Scaled target value following each window.
    pub targets: Vec<f64>,
    /// Date of each target row.
    pub sample_dates: Vec<Date>,
    pub feature_names: Vec<String>,
    pub target_column: String,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.inputs.steps
    }

    pub fn n_features(&self) -> usize {
        self.inputs.width
    }

    /// Samples `range`, in order.
    pub fn slice(&self, range: Range<usize>) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.slice_batch(range.clone()),
            targets: self.targets[range.clone()].to_vec(),
            sample_dates: self.sample_dates[range].to_vec(),
            feature_names: self.feature_names.clone(),
            target_column: self.target_column.clone(),
        }
    }

    /// Samples at `indices`, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Tensor3, Vec<f64>) {
        (
            self.inputs.gather_batch(indices),
            indices.iter().map(|&i| self.targets[i]).collect(),
        )
    }
}

/// Sample `i` takes rows `[i, i + lookback)` of every column as input and
/// `target_column` at row `i + lookback` as target.
pub fn make_windows(frame: &SeriesFrame, lookback: usize, target_column: &str) -> Result<WindowedDataset> {
    if lookback < 1 {
        return Err(Error::invalid("lookback", "must be >= 1"));
    }
    let target = frame.column(target_column)?;
    let len = frame.len();
    if len <= lookback {
        return Err(Error::SeriesTooShort { len, lookback });
    }
    let n = len - lookback;
    let width = frame.n_columns();
    let cols: Vec<&[f64]> = (0..width).map(|c| frame.column_at(c)).collect();
    let mut inputs = Tensor3::zeros(n, lookback, width);
    for i in 0..n {
        for t in 0..lookback {
            let row = inputs.row_mut(i, t);
            for (c, col) in cols.iter().enumerate() {
                row[c] = col[i + t];
            }
        }
    }
    Ok(WindowedDataset {
        inputs,
        targets: target[lookback..].to_vec(),
        sample_dates: frame.dates()[lookback..].to_vec(),
        feature_names: frame.column_names().to_vec(),
        target_column: target_column.to_owned(),
    })
}

/// First `floor(fraction * n)` samples train, the rest test.
pub fn chronological_split(dataset: &WindowedDataset, spec: &SplitSpec) -> Result<(WindowedDataset, WindowedDataset)> {
    spec.validate()?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::invalid("dataset", "need at least two samples to split"));
    }
    let k = spec.train_samples(n);
    Ok((dataset.slice(0..k), dataset.slice(k..n)))
}

/// A scaled frame cut into train and test windows, plus the scaler fitted
/// on the training rows.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub scaler: ScalerParams,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

/// Fit on the training rows, scale the whole frame, window and split.
pub fn prepare(frame: &SeriesFrame, spec: &SplitSpec, target_column: &str) -> Result<PreparedData> {
    let rows = spec.train_rows(frame.len())?;
    let scaler = fit_minmax(frame, rows)?;
    prepare_with_scaler(frame, spec, target_column, scaler)
}

/// As [`prepare`], reusing an existing scaler.
pub fn prepare_with_scaler(
    frame: &SeriesFrame,
    spec: &SplitSpec,
    target_column: &str,
    scaler: ScalerParams,
) -> Result<PreparedData> {
    if let Some((column, date)) = frame.first_missing() {
        return Err(Error::MissingValue {
            column: column.to_owned(),
            date,
        });
    }
    let scaled = transform(frame, &scaler)?;
    let windows = make_windows(&scaled, spec.lookback, target_column)?;
    let (train, test) = chronological_split(&windows, spec)?;
    Ok(PreparedData { scaler, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dates(n: usize) -> Vec<Date> {
        let start = Date::from_ymd_opt(2021, 3, 1).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn frame(cols: &[(&str, Vec<f64>)]) -> SeriesFrame {
        let n = cols[0].1.len();
        SeriesFrame::new(dates(n), cols.iter().map(|(n, v)| ((*n).into(), v.clone())).collect()).unwrap()
    }

    #[test]
    fn fit_examples() {
        let f = frame(&[("a", vec![2.0, 4.0, 6.0]), ("b", vec![3.0, 3.0, 3.0])]);
        let p = fit_minmax(&f, 0..3).unwrap();
        assert_eq!((p.columns[0].min, p.columns[0].max), (2.0, 6.0));
        assert_eq!(p.columns[1].min, p.columns[1].max);
        assert!(fit_minmax(&f, 0..0).is_err());
    }

    #[test]
    fn fit_ignores_rows_outside_range() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let f = frame(&[("a", v)]);
        let p = fit_minmax(&f, 0..80).unwrap();
        assert_eq!((p.columns[0].min, p.columns[0].max), (0.0, 79.0));
    }

    #[test]
    fn fit_all_missing_column() {
        let f = frame(&[("a", vec![f64::NAN, f64::NAN, 1.0])]);
        assert_eq!(fit_minmax(&f, 0..2), Err(Error::AllMissing("a".into())));
    }

    #[test]
    fn transform_examples() {
        let f = frame(&[("a", vec![2.0, 4.0, 6.0]), ("b", vec![3.0, 3.0, 3.0])]);
        let p = fit_minmax(&f, 0..3).unwrap();
        let s = transform(&f, &p).unwrap();
        assert_eq!(s.column("a").unwrap(), &[0.0, 0.5, 1.0]);
        assert_eq!(s.column("b").unwrap(), &[0.0, 0.0, 0.0]);
        let back = inverse_transform(&s, &p).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn transform_rejects_misaligned_columns() {
        let f = frame(&[("a", vec![1.0, 2.0]), ("b", vec![1.0, 2.0])]);
        let p = fit_minmax(&f, 0..2).unwrap();
        let swapped = f.select(&["b", "a"]).unwrap();
        assert!(matches!(
            transform(&swapped, &p),
            Err(Error::ColumnMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn window_counts_and_alignment() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let f = frame(&[("close", v)]);
        let w = make_windows(&f, 60, "close").unwrap();
        assert_eq!(w.len(), 40);
        assert_eq!(w.targets[0], 60.0);
        assert_eq!(w.sample_dates[0], f.dates()[60]);
        assert_eq!(w.inputs.get(0, 59, 0), 59.0);
        assert!(matches!(
            make_windows(&f, 100, "close"),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn perturbation_is_local() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let base = make_windows(&frame(&[("close", v.clone())]), 60, "close").unwrap();
        let mut p = v;
        p[75] = -1.0;
        let pert = make_windows(&frame(&[("close", p)]), 60, "close").unwrap();
        for i in 0..base.len() {
            let touches = (i..i + 60).contains(&75) || i + 60 == 75;
            let changed = base.inputs.sample(i) != pert.inputs.sample(i) || base.targets[i] != pert.targets[i];
            assert_eq!(touches, changed, "sample {i}");
        }
    }

    #[test]
    fn split_counts() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let w = make_windows(&frame(&[("close", v)]), 60, "close").unwrap();
        let (tr, te) = chronological_split(&w, &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), te.len()), (32, 8));
        assert!(tr.sample_dates.last() < te.sample_dates.first());

        let five = w.slice(0..5);
        let (tr, te) = chronological_split(&five, &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), te.len()), (4, 1));
        assert!(chronological_split(&w.slice(0..1), &SplitSpec::default()).is_err());
    }

    #[test]
    fn split_spec_validation() {
        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            let s = SplitSpec {
                train_fraction: bad,
                lookback: 5,
            };
            assert!(s.validate().is_err());
        }
        assert!(SplitSpec {
            train_fraction: 0.5,
            lookback: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn train_rows_cover_training_targets() {
        let spec = SplitSpec::default();
        // 100 rows, lookback 60 -> 40 samples, 32 train -> targets up to row 91
        assert_eq!(spec.train_rows(100).unwrap(), 0..92);
    }

    #[test]
    fn prepare_rejects_missing_values() {
        let mut v: Vec<f64> = (0..30).map(|i| i as f64).collect();
        v[3] = f64::NAN;
        let f = frame(&[("close", v)]);
        let spec = SplitSpec {
            train_fraction: 0.8,
            lookback: 5,
        };
        assert!(matches!(prepare(&f, &spec, "close"), Err(Error::MissingValue { .. })));
    }
}
