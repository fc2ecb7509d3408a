//! Engineered features: returns, moving averages, MACD, Bollinger bands,
//! calendar features, the close-in-range ratio and Pearson correlation.
//!
//! Series functions take and return plain slices with NaN for missing.
//! Rolling windows that contain a missing value produce a missing output.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use chrono::Datelike;

use crate::error::{Error, Result};
use crate::frame::{Date, SeriesFrame};
use crate::warning::Warning;
use crate::{is_missing, MISSING};

/// Raw price columns, in the order they lead every feature frame.
pub const PRICE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MacdConfig {
    pub fast: usize,
    pub slow: usize,
    pub signal: usize,
}

impl Default for MacdConfig {
    fn default() -> Self {
        MacdConfig {
            fast: 12,
            slow: 26,
            signal: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BollingerConfig {
    pub window: usize,
    pub num_std: f64,
}

impl Default for BollingerConfig {
    fn default() -> Self {
        BollingerConfig {
            window: 20,
            num_std: 2.0,
        }
    }
}

/// Which features to engineer. `Default` is the full set with the standard
/// parameters; [`IndicatorConfig::none`] disables everything.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IndicatorConfig {
    /// Emit `log_return` and `pct_return`.
    pub returns: bool,
    pub sma_windows: Vec<usize>,
    pub ema_spans: Vec<usize>,
    pub macd: Option<MacdConfig>,
    pub bollinger: Option<BollingerConfig>,
    pub range_position: bool,
    /// Emit `weekday`, `month` and `week_of_year`.
    pub temporal: bool,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            returns: true,
            sma_windows: vec![5, 10],
            ema_spans: vec![5, 12],
            macd: Some(MacdConfig::default()),
            bollinger: Some(BollingerConfig::default()),
            range_position: true,
            temporal: true,
        }
    }
}

impl IndicatorConfig {
    pub fn none() -> Self {
        IndicatorConfig {
            returns: false,
            sma_windows: Vec::new(),
            ema_spans: Vec::new(),
            macd: None,
            bollinger: None,
            range_position: false,
            temporal: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sma_windows.iter().any(|&w| w < 1) {
            return Err(Error::invalid("sma_windows", "windows must be >= 1"));
        }
        if self.ema_spans.iter().any(|&s| s < 1) {
            return Err(Error::invalid("ema_spans", "spans must be >= 1"));
        }
        if let Some(m) = self.macd {
            if m.fast < 1 || m.slow < 1 || m.signal < 1 {
                return Err(Error::invalid("macd", "spans must be >= 1"));
            }
            if m.fast >= m.slow {
                return Err(Error::invalid("macd", "fast span must be below slow span"));
            }
        }
        if let Some(b) = self.bollinger {
            if b.window < 2 {
                return Err(Error::invalid("bollinger.window", "window must be >= 2"));
            }
            if !(b.num_std.is_finite() && b.num_std >= 0.0) {
                return Err(Error::invalid("bollinger.num_std", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Names of the engineered columns, in frame order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.returns {
            names.push("log_return".to_owned());
            names.push("pct_return".to_owned());
        }
        names.extend(self.sma_windows.iter().map(|w| format!("sma_{w}")));
        names.extend(self.ema_spans.iter().map(|s| format!("ema_{s}")));
        if self.macd.is_some() {
            names.push("macd".to_owned());
            names.push("macd_signal".to_owned());
        }
        if self.bollinger.is_some() {
            names.push("bb_upper".to_owned());
            names.push("bb_lower".to_owned());
        }
        if self.range_position {
            names.push("range_position".to_owned());
        }
        if self.temporal {
            names.push("weekday".to_owned());
            names.push("month".to_owned());
            names.push("week_of_year".to_owned());
        }
        names
    }
}

/// `ln(close[t] / close[t-1])`; the first position is missing.
pub fn log_return(close: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![MISSING; close.len()];
    for t in 1..close.len() {
        let (prev, cur) = (close[t - 1], close[t]);
        if is_missing(prev) || is_missing(cur) {
            continue;
        }
        if prev <= 0.0 {
            return Err(Error::NonPositiveValue {
                index: t - 1,
                value: prev,
            });
        }
        if cur <= 0.0 {
            return Err(Error::NonPositiveValue {
                index: t,
                value: cur,
            });
        }
        out[t] = libm::log(cur / prev);
    }
    Ok(out)
}

/// `close[t] / close[t-1] - 1`. Also returns the positions left missing
/// because the previous close was zero.
pub fn pct_return(close: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![MISSING; close.len()];
    let mut zero_div = Vec::new();
    for t in 1..close.len() {
        let (prev, cur) = (close[t - 1], close[t]);
        if is_missing(prev) || is_missing(cur) {
            continue;
        }
        if prev == 0.0 {
            zero_div.push(t);
            continue;
        }
        out[t] = cur / prev - 1.0;
    }
    (out, zero_div)
}

/// Trailing simple moving average. No partial windows.
pub fn sma(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::invalid("window", "must be >= 1"));
    }
    let mut out = vec![MISSING; x.len()];
    let mut sum = 0.0;
    let mut missing_in_window = 0usize;
    for t in 0..x.len() {
        if is_missing(x[t]) {
            missing_in_window += 1;
        } else {
            sum += x[t];
        }
        if t >= window {
            let old = x[t - window];
            if is_missing(old) {
                missing_in_window -= 1;
            } else {
                sum -= old;
            }
        }
        if t + 1 >= window && missing_in_window == 0 {
            out[t] = sum / window as f64;
        }
        // Re-anchor the running sum once per window to bound drift.
        if (t + 1) % window == 0 && missing_in_window == 0 {
            sum = x[t + 1 - window..=t].iter().sum();
        }
    }
    Ok(out)
}

/// EMA recurrence with `alpha = 2 / (span + 1)`, seeded with the first
/// observed value. Positions are masked missing until `min_periods`
/// observations have been seen. A missing input leaves the state unchanged
/// and yields a missing output.
fn ema_masked(x: &[f64], span: usize, min_periods: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = vec![MISSING; x.len()];
    let mut state: Option<f64> = None;
    let mut seen = 0usize;
    for (t, &v) in x.iter().enumerate() {
        if is_missing(v) {
            continue;
        }
        seen += 1;
        let next = match state {
            None => v,
            Some(prev) => alpha * v + (1.0 - alpha) * prev,
        };
        state = Some(next);
        if seen >= min_periods {
            out[t] = next;
        }
    }
    out
}

/// Exponential moving average, non-adjusted recurrence.
pub fn ema(x: &[f64], span: usize) -> Result<Vec<f64>> {
    if span < 1 {
        return Err(Error::invalid("span", "must be >= 1"));
    }
    Ok(ema_masked(x, span, 1))
}

/// MACD line and signal line.
///
/// Each EMA is masked until it has seen as many observations as its span,
/// so with the default 12/26/9 the line starts at index 25 and the signal at
/// index 33. Where defined, the line equals `ema(fast) - ema(slow)`.
pub fn macd(close: &[f64], cfg: &MacdConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.fast < 1 || cfg.slow < 1 || cfg.signal < 1 {
        return Err(Error::invalid("macd", "spans must be >= 1"));
    }
    let fast = ema_masked(close, cfg.fast, cfg.fast);
    let slow = ema_masked(close, cfg.slow, cfg.slow);
    let line: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let signal = ema_masked(&line, cfg.signal, cfg.signal);
    Ok((line, signal))
}

/// Bollinger bands: trailing mean plus/minus `num_std` population standard
/// deviations. Returns `(upper, lower)`.
pub fn bollinger(close: &[f64], window: usize, num_std: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if window < 2 {
        return Err(Error::invalid("window", "must be >= 2"));
    }
    let mid = sma(close, window)?;
    let mut upper = vec![MISSING; close.len()];
    let mut lower = vec![MISSING; close.len()];
    for t in (window - 1)..close.len() {
        let m = mid[t];
        if is_missing(m) {
            continue;
        }
        let w = &close[t + 1 - window..=t];
        let var = w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / window as f64;
        let sd = libm::sqrt(var);
        upper[t] = m + num_std * sd;
        lower[t] = m - num_std * sd;
    }
    Ok((upper, lower))
}

/// Weekday (Monday = 0), month (1-12) and ISO-8601 week number (1-53).
pub fn temporal_features(dates: &[Date]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let weekday = dates
        .iter()
        .map(|d| d.weekday().num_days_from_monday() as f64)
        .collect();
    let month = dates.iter().map(|d| d.month() as f64).collect();
    let week = dates.iter().map(|d| d.iso_week().week() as f64).collect();
    (weekday, month, week)
}

/// `(close - low) / (high - low)`, missing where the range is zero.
pub fn range_position(high: &[f64], low: &[f64], close: &[f64]) -> Vec<f64> {
    high.iter()
        .zip(low)
        .zip(close)
        .map(|((&h, &l), &c)| {
            let range = h - l;
            if range == 0.0 || range.is_nan() || c.is_nan() {
                MISSING
            } else {
                (c - l) / range
            }
        })
        .collect()
}

/// Pearson coefficient over the rows where both inputs are observed.
/// Also returns the number of such rows. `None` for fewer than two rows or
/// zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> (Option<f64>, usize) {
    let pairs = || {
        a.iter()
            .zip(b)
            .filter(|(x, y)| !is_missing(**x) && !is_missing(**y))
    };
    let n = pairs().count();
    if n < 2 {
        return (None, n);
    }
    let (sa, sb) = pairs().fold((0.0, 0.0), |(sa, sb), (x, y)| (sa + x, sb + y));
    let (ma, mb) = (sa / n as f64, sb / n as f64);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in pairs() {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return (None, n);
    }
    let r = sab / libm::sqrt(saa * sbb);
    (Some(r.clamp(-1.0, 1.0)), n)
}

/// Symmetric matrix of pairwise Pearson coefficients. Missing entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<Warning>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        let v = self.values[i][j];
        (!v.is_nan()).then_some(v)
    }
}

pub fn pearson_matrix<S: AsRef<str>>(frame: &SeriesFrame, columns: &[S]) -> Result<CorrelationMatrix> {
    if columns.len() < 2 {
        return Err(Error::invalid("columns", "need at least two columns"));
    }
    let cols: Vec<&[f64]> = columns
        .iter()
        .map(|c| frame.column(c.as_ref()))
        .collect::<Result<_>>()?;
    let k = cols.len();
    let mut values = vec![vec![MISSING; k]; k];
    let mut warnings = Vec::new();
    for i in 0..k {
        for j in i..k {
            let (r, n) = pearson(cols[i], cols[j]);
            if n < 2 && i != j {
                warnings.push(Warning::InsufficientOverlap {
                    a: columns[i].as_ref().to_owned(),
                    b: columns[j].as_ref().to_owned(),
                    n,
                });
            }
            let r = if i == j { r.map(|_| 1.0) } else { r };
            let v = r.unwrap_or(MISSING);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        labels: columns.iter().map(|c| c.as_ref().to_owned()).collect(),
        values,
        warnings,
    })
}

/// Feature frame after warm-up trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub frame: SeriesFrame,
    /// Leading rows removed because an engineered feature was still warming up.
    pub trimmed: usize,
    pub warnings: Vec<Warning>,
}

/// Appends every configured feature without trimming.
///
/// Output column order: the price columns present in the input (open, high,
/// low, close, volume), the engineered features, then any remaining input
/// columns in their original order.
pub fn compute_features(frame: &SeriesFrame, cfg: &IndicatorConfig) -> Result<(SeriesFrame, Vec<Warning>)> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let mut added: Vec<(String, Vec<f64>)> = Vec::new();
    let needs_close = cfg.returns
        || !cfg.sma_windows.is_empty()
        || !cfg.ema_spans.is_empty()
        || cfg.macd.is_some()
        || cfg.bollinger.is_some()
        || cfg.range_position;
    let close: &[f64] = if needs_close { frame.column("close")? } else { &[] };

    if cfg.returns {
        let log = log_return(close).map_err(|e| match e {
            Error::NonPositiveValue { index, value } => Error::NonPositivePrice {
                date: frame.dates()[index],
                value,
            },
            other => other,
        })?;
        let (pct, zero_div) = pct_return(close);
        warnings.extend(zero_div.into_iter().map(|t| Warning::ZeroPrice {
            date: frame.dates()[t],
        }));
        added.push(("log_return".into(), log));
        added.push(("pct_return".into(), pct));
    }
    for &w in &cfg.sma_windows {
        added.push((format!("sma_{w}"), sma(close, w)?));
    }
    for &s in &cfg.ema_spans {
        added.push((format!("ema_{s}"), ema(close, s)?));
    }
    if let Some(m) = &cfg.macd {
        let (line, signal) = macd(close, m)?;
        added.push(("macd".into(), line));
        added.push(("macd_signal".into(), signal));
    }
    if let Some(b) = &cfg.bollinger {
        let (upper, lower) = bollinger(close, b.window, b.num_std)?;
        added.push(("bb_upper".into(), upper));
        added.push(("bb_lower".into(), lower));
    }
    if cfg.range_position {
        let rp = range_position(frame.column("high")?, frame.column("low")?, close);
        added.push(("range_position".into(), rp));
    }
    if cfg.temporal {
        let (wd, m, wk) = temporal_features(frame.dates());
        added.push(("weekday".into(), wd));
        added.push(("month".into(), m));
        added.push(("week_of_year".into(), wk));
    }

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for name in PRICE_COLUMNS {
        if let Ok(c) = frame.column(name) {
            columns.push((name.into(), c.to_vec()));
        }
    }
    columns.extend(added);
    for (name, c) in frame.columns() {
        if !PRICE_COLUMNS.contains(&name) {
            columns.push((name.into(), c.to_vec()));
        }
    }
    Ok((SeriesFrame::new(frame.dates().to_vec(), columns)?, warnings))
}

/// Length of the leading run of missing values.
pub fn missing_prefix(x: &[f64]) -> usize {
    x.iter().take_while(|v| is_missing(**v)).count()
}

/// [`compute_features`] followed by a single warm-up trim: the longest
/// missing prefix over the engineered columns is dropped from every column.
pub fn build_feature_frame(frame: &SeriesFrame, cfg: &IndicatorConfig) -> Result<FeatureFrame> {
    let (full, warnings) = compute_features(frame, cfg)?;
    let trimmed = cfg
        .feature_names()
        .iter()
        .map(|n| full.column(n).map(missing_prefix))
        .try_fold(0usize, |acc, p| p.map(|p| acc.max(p)))?;
    let frame = full.slice_rows(trimmed.min(full.len())..full.len());
    Ok(FeatureFrame {
        frame,
        trimmed,
        warnings,
    })
}
