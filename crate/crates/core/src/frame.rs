//! Dated, column-oriented numeric tables and the cleaning operations that
//! act on them: sorting and de-duplicating raw rows, forward fill, and the
//! as-of join of sparse fundamentals onto trading days.
//!
//! Missing values are stored as NaN (see [`crate::MISSING`]).

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::ops::Range;

use crate::error::{Error, Result};
use crate::warning::Warning;
use crate::{is_missing, MISSING};

pub type Date = chrono::NaiveDate;

/// One trading day of an instrument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBar {
    pub date: Date,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl PriceBar {
    /// Describes every OHLCV invariant this bar breaks. Missing fields are skipped.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ohlc = [self.open, self.high, self.low, self.close];
        if ohlc.iter().all(|v| !is_missing(*v)) {
            let body_lo = self.open.min(self.close);
            let body_hi = self.open.max(self.close);
            if self.low > body_lo {
                out.push(format!("low {} above min(open, close) {}", self.low, body_lo));
            }
            if self.high < body_hi {
                out.push(format!("high {} below max(open, close) {}", self.high, body_hi));
            }
        }
        if self.volume < 0.0 {
            out.push(format!("negative volume {}", self.volume));
        }
        out
    }
}

/// Canonical column names for the fundamentals fields, in join order.
pub const FUNDAMENTAL_COLUMNS: [&str; 10] = [
    "equity",
    "total_asset",
    "sales",
    "profit_before_tax",
    "profit_after_tax",
    "cash_dividend_pct",
    "stock_dividend_pct",
    "face_value",
    "paid_up_capital",
    "num_shares",
];

/// A sparse company report. Any numeric field may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FundamentalsRecord {
    pub effective_date: Date,
    pub equity: Option<f64>,
    pub total_asset: Option<f64>,
    pub sales: Option<f64>,
    pub profit_before_tax: Option<f64>,
    pub profit_after_tax: Option<f64>,
    pub cash_dividend_pct: Option<f64>,
    pub stock_dividend_pct: Option<f64>,
    pub face_value: Option<f64>,
    pub paid_up_capital: Option<f64>,
    pub num_shares: Option<f64>,
}

impl FundamentalsRecord {
    pub fn new(effective_date: Date) -> Self {
        FundamentalsRecord {
            effective_date,
            ..Default::default()
        }
    }

    /// Field values in [`FUNDAMENTAL_COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.equity,
            self.total_asset,
            self.sales,
            self.profit_before_tax,
            self.profit_after_tax,
            self.cash_dividend_pct,
            self.stock_dividend_pct,
            self.face_value,
            self.paid_up_capital,
            self.num_shares,
        ]
    }

    /// Mutable access by canonical column name.
    pub fn field_mut(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match name {
            "equity" => &mut self.equity,
            "total_asset" => &mut self.total_asset,
            "sales" => &mut self.sales,
            "profit_before_tax" => &mut self.profit_before_tax,
            "profit_after_tax" => &mut self.profit_after_tax,
            "cash_dividend_pct" => &mut self.cash_dividend_pct,
            "stock_dividend_pct" => &mut self.stock_dividend_pct,
            "face_value" => &mut self.face_value,
            "paid_up_capital" => &mut self.paid_up_capital,
            "num_shares" => &mut self.num_shares,
            _ => return None,
        })
    }
}

/// Dated numeric table. Dates are strictly increasing and every column has
/// one value per date.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    dates: Vec<Date>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SeriesFrame {
    pub fn new(dates: Vec<Date>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedDates(i + 1));
        }
        let mut frame = SeriesFrame {
            dates,
            names: Vec::with_capacity(columns.len()),
            columns: Vec::with_capacity(columns.len()),
        };
        for (name, values) in columns {
            frame.push_column(name, values)?;
        }
        Ok(frame)
    }

    /// Builds a frame from raw rows in any order. Rows are stably sorted by
    /// date and, for repeated dates, the row appearing last wins.
    pub fn from_unsorted_rows(names: Vec<String>, rows: Vec<(Date, Vec<f64>)>) -> Result<Self> {
        let width = names.len();
        if let Some((_, r)) = rows.iter().find(|(_, r)| r.len() != width) {
            return Err(Error::Shape {
                what: "row width",
                expected: width,
                actual: r.len(),
            });
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&i| rows[i].0);
        let mut dates: Vec<Date> = Vec::with_capacity(rows.len());
        let mut picked: Vec<usize> = Vec::with_capacity(rows.len());
        for i in order {
            if dates.last() == Some(&rows[i].0) {
                *picked.last_mut().unwrap() = i;
            } else {
                dates.push(rows[i].0);
                picked.push(i);
            }
        }
        let columns = names
            .into_iter()
            .enumerate()
            .map(|(c, name)| (name, picked.iter().map(|&i| rows[i].1[c]).collect()))
            .collect();
        SeriesFrame::new(dates, columns)
    }

    pub fn from_bars(bars: &[PriceBar]) -> Result<Self> {
        let rows = bars
            .iter()
            .map(|b| (b.date, vec![b.open, b.high, b.low, b.close, b.volume]))
            .collect();
        let names = ["open", "high", "low", "close", "volume"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        SeriesFrame::from_unsorted_rows(names, rows)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn column_at(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    fn push_column(&mut self, name: String, values: Vec<f64>) -> Result<()> {
        if self.has_column(&name) {
            return Err(Error::DuplicateColumn(name));
        }
        if values.len() != self.dates.len() {
            return Err(Error::ColumnLength {
                name,
                expected: self.dates.len(),
                actual: values.len(),
            });
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    /// Returns a copy with `name` appended as the last column.
    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name.into(), values)?;
        Ok(self)
    }

    /// Returns a copy with `name` replaced by `values`.
    pub fn replace_column(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        let idx = self.column_index(name)?;
        if values.len() != self.dates.len() {
            return Err(Error::ColumnLength {
                name: name.to_owned(),
                expected: self.dates.len(),
                actual: values.len(),
            });
        }
        self.columns[idx] = values;
        Ok(self)
    }

    /// Projection onto `names`, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            columns.push((n.to_owned(), self.column(n)?.to_vec()));
        }
        SeriesFrame::new(self.dates.clone(), columns)
    }

    /// Row slice `rows` of every column.
    pub fn slice_rows(&self, rows: Range<usize>) -> Self {
        SeriesFrame {
            dates: self.dates[rows.clone()].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[rows.clone()].to_vec()).collect(),
        }
    }

    /// Values of row `i` in column order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Appends one dated row; `date` must follow the last date.
    pub fn push_row(&mut self, date: Date, values: &[f64]) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Shape {
                what: "row width",
                expected: self.columns.len(),
                actual: values.len(),
            });
        }
        if self.dates.last().is_some_and(|&d| d >= date) {
            return Err(Error::UnsortedDates(self.dates.len()));
        }
        self.dates.push(date);
        for (c, &v) in self.columns.iter_mut().zip(values) {
            c.push(v);
        }
        Ok(())
    }

    /// First `(column, date)` holding a missing value, scanning column by column.
    pub fn first_missing(&self) -> Option<(&str, Date)> {
        self.columns().find_map(|(name, col)| {
            col.iter()
                .position(|v| is_missing(*v))
                .map(|i| (name, self.dates[i]))
        })
    }

    /// Bars for frames that carry the five OHLCV columns.
    pub fn bars(&self) -> Result<Vec<PriceBar>> {
        let o = self.column("open")?;
        let h = self.column("high")?;
        let l = self.column("low")?;
        let c = self.column("close")?;
        let v = self.column("volume")?;
        Ok((0..self.len())
            .map(|i| PriceBar {
                date: self.dates[i],
                open: o[i],
                high: h[i],
                low: l[i],
                close: c[i],
                volume: v[i],
            })
            .collect())
    }
}

/// OHLCV sanity check over whichever of the five columns are present.
/// Offending rows are reported, never removed.
pub fn ohlc_violations(frame: &SeriesFrame) -> Vec<Warning> {
    let get = |name: &str| frame.column(name).ok();
    let (o, h, l, c, v) = (
        get("open"),
        get("high"),
        get("low"),
        get("close"),
        get("volume"),
    );
    let at = |col: Option<&[f64]>, i: usize| col.map_or(MISSING, |c| c[i]);
    (0..frame.len())
        .flat_map(|i| {
            let bar = PriceBar {
                date: frame.dates[i],
                open: at(o, i),
                high: at(h, i),
                low: at(l, i),
                close: at(c, i),
                volume: at(v, i),
            };
            bar.violations()
                .into_iter()
                .map(move |detail| Warning::OhlcViolation {
                    date: bar.date,
                    detail,
                })
        })
        .collect()
}

/// Replaces each missing value with the nearest earlier observed value in
/// the same column. Leading gaps stay missing.
pub fn forward_fill<S: AsRef<str>>(frame: &SeriesFrame, columns: &[S]) -> Result<SeriesFrame> {
    let mut out = frame.clone();
    for name in columns {
        let idx = out.column_index(name.as_ref())?;
        fill_forward_in_place(&mut out.columns[idx]);
    }
    Ok(out)
}

/// [`forward_fill`] over every column.
pub fn forward_fill_all(frame: &SeriesFrame) -> SeriesFrame {
    let mut out = frame.clone();
    for col in &mut out.columns {
        fill_forward_in_place(col);
    }
    out
}

pub(crate) fn fill_forward_in_place(col: &mut [f64]) -> usize {
    let mut last = MISSING;
    let mut filled = 0;
    for v in col.iter_mut() {
        if is_missing(*v) {
            if !is_missing(last) {
                *v = last;
                filled += 1;
            }
        } else {
            last = *v;
        }
    }
    filled
}

/// Drops the leading rows that hold a missing value in any column and
/// returns the number removed.
pub fn trim_incomplete_prefix(frame: &SeriesFrame) -> (SeriesFrame, usize) {
    let k = frame
        .columns
        .iter()
        .map(|c| c.iter().take_while(|v| is_missing(**v)).count())
        .max()
        .unwrap_or(0)
        .min(frame.len());
    (frame.slice_rows(k..frame.len()), k)
}

/// As-of join: every trading date takes the latest record whose effective
/// date is on or before it. One column per [`FUNDAMENTAL_COLUMNS`] entry is
/// appended; price columns are carried through untouched.
pub fn merge_fundamentals(
    prices: &SeriesFrame,
    fundamentals: &[FundamentalsRecord],
) -> Result<SeriesFrame> {
    let mut records = fundamentals.to_vec();
    records.sort_by_key(|r| r.effective_date);

    let mut joined: Vec<Vec<f64>> = vec![Vec::with_capacity(prices.len()); FUNDAMENTAL_COLUMNS.len()];
    let mut next = 0;
    let mut current: Option<&FundamentalsRecord> = None;
    for &date in prices.dates() {
        while next < records.len() && records[next].effective_date <= date {
            current = Some(&records[next]);
            next += 1;
        }
        let values = current.map(FundamentalsRecord::values);
        for (k, col) in joined.iter_mut().enumerate() {
            col.push(values.and_then(|v| v[k]).unwrap_or(MISSING));
        }
    }

    let mut out = prices.clone();
    for (name, values) in FUNDAMENTAL_COLUMNS.iter().zip(joined) {
        out = out.with_column(*name, values)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> Date {
        Date::from_ymd_opt(2024, 1, day).unwrap()
    }

    fn frame(values: &[f64]) -> SeriesFrame {
        let dates = (1..=values.len() as u32).map(d).collect();
        SeriesFrame::new(dates, vec![("x".into(), values.to_vec())]).unwrap()
    }

    fn same(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
    }

    #[test]
    fn rejects_unsorted_or_ragged() {
        assert_eq!(
            SeriesFrame::new(vec![d(2), d(1)], vec![]),
            Err(Error::UnsortedDates(1))
        );
        assert!(matches!(
            SeriesFrame::new(vec![d(1)], vec![("a".into(), vec![1.0, 2.0])]),
            Err(Error::ColumnLength { .. })
        ));
        assert!(matches!(
            SeriesFrame::new(
                vec![d(1)],
                vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]
            ),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let rows = vec![(d(3), vec![3.0]), (d(1), vec![1.0]), (d(2), vec![2.0])];
        let f = SeriesFrame::from_unsorted_rows(vec!["close".into()], rows).unwrap();
        assert_eq!(f.dates(), &[d(1), d(2), d(3)]);
        assert_eq!(f.column("close").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn duplicate_dates_keep_last_row() {
        let rows = vec![
            (d(2), vec![20.0]),
            (d(1), vec![1.0]),
            (d(2), vec![21.0]),
            (d(3), vec![3.0]),
        ];
        let f = SeriesFrame::from_unsorted_rows(vec!["close".into()], rows).unwrap();
        assert_eq!(f.dates(), &[d(1), d(2), d(3)]);
        assert_eq!(f.column("close").unwrap(), &[1.0, 21.0, 3.0]);
    }

    #[test]
    fn forward_fill_examples() {
        let m = MISSING;
        let f = forward_fill(&frame(&[1.0, m, m, 4.0]), &["x"]).unwrap();
        assert_eq!(f.column("x").unwrap(), &[1.0, 1.0, 1.0, 4.0]);

        let f = forward_fill(&frame(&[m, 2.0, m]), &["x"]).unwrap();
        assert!(same(f.column("x").unwrap(), &[m, 2.0, 2.0]));

        let f = forward_fill(&frame(&[m, m, m]), &["x"]).unwrap();
        assert!(same(f.column("x").unwrap(), &[m, m, m]));
    }

    #[test]
    fn forward_fill_unknown_column() {
        assert_eq!(
            forward_fill(&frame(&[1.0]), &["nope"]),
            Err(Error::UnknownColumn("nope".into()))
        );
    }

    fn record(day: u32, equity: f64) -> FundamentalsRecord {
        FundamentalsRecord {
            equity: Some(equity),
            ..FundamentalsRecord::new(d(day))
        }
    }

    #[test]
    fn as_of_join_single_record() {
        let prices = frame(&[10.0, 11.0, 12.0]);
        let merged = merge_fundamentals(&prices, &[record(2, 5.0)]).unwrap();
        assert!(same(merged.column("equity").unwrap(), &[MISSING, 5.0, 5.0]));
        assert_eq!(merged.n_columns(), 1 + FUNDAMENTAL_COLUMNS.len());
    }

    #[test]
    fn as_of_join_carries_latest_record() {
        let prices = frame(&[10.0, 11.0, 12.0]);
        // deliberately unsorted input
        let merged = merge_fundamentals(&prices, &[record(3, 7.0), record(1, 5.0)]).unwrap();
        assert_eq!(merged.column("equity").unwrap(), &[5.0, 5.0, 7.0]);
        // fields absent from the record stay missing
        assert!(merged.column("sales").unwrap().iter().all(|v| v.is_nan()));
    }

    #[test]
    fn empty_fundamentals_yield_missing_columns() {
        let prices = frame(&[10.0, 11.0]);
        let merged = merge_fundamentals(&prices, &[]).unwrap();
        for name in FUNDAMENTAL_COLUMNS {
            assert!(merged.column(name).unwrap().iter().all(|v| v.is_nan()));
        }
        assert_eq!(merged.len(), prices.len());
        assert!(same(merged.column("x").unwrap(), prices.column("x").unwrap()));
    }

    #[test]
    fn ohlc_violation_flagged_not_dropped() {
        let bars = [
            PriceBar {
                date: d(1),
                open: 10.0,
                high: 11.0,
                low: 9.0,
                close: 10.5,
                volume: 100.0,
            },
            PriceBar {
                date: d(2),
                open: 10.0,
                high: 9.0,
                low: 12.0,
                close: 10.5,
                volume: 100.0,
            },
        ];
        let f = SeriesFrame::from_bars(&bars).unwrap();
        let warnings = ohlc_violations(&f);
        assert_eq!(f.len(), 2);
        assert_eq!(warnings.len(), 2);
        assert!(warnings
            .iter()
            .all(|w| matches!(w, Warning::OhlcViolation { date, .. } if *date == d(2))));
    }

    #[test]
    fn incomplete_prefix_is_trimmed() {
        let f = SeriesFrame::new(
            (1..=4).map(d).collect(),
            vec![
                ("a".into(), vec![MISSING, 1.0, 2.0, 3.0]),
                ("b".into(), vec![MISSING, MISSING, 5.0, MISSING]),
            ],
        )
        .unwrap();
        let (g, k) = trim_incomplete_prefix(&f);
        assert_eq!(k, 2);
        assert_eq!(g.dates(), &[d(3), d(4)]);
    }

    #[test]
    fn push_row_requires_later_date() {
        let mut f = frame(&[1.0, 2.0]);
        assert!(f.push_row(d(2), &[5.0]).is_err());
        f.push_row(d(5), &[5.0]).unwrap();
        assert_eq!(f.len(), 3);
    }
}
