//! Raw OHLCV and fundamentals CSV parsing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use tsf_core::frame::{ohlc_violations, FUNDAMENTAL_COLUMNS};
use tsf_core::indicators::PRICE_COLUMNS;
use tsf_core::{Date, FundamentalsRecord, SeriesFrame, MISSING};

use crate::error::{Error, Result};

/// Maps canonical fields to file headers. Header matching ignores case and
/// surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OhlcvSchema {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
    /// strftime-style pattern; ISO-8601 when `None`.
    pub date_format: Option<String>,
}

impl Default for OhlcvSchema {
    fn default() -> Self {
        OhlcvSchema {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
            date_format: None,
        }
    }
}

impl OhlcvSchema {
    /// Overrides one mapping, e.g. `set("close", "Adj Close")`.
    pub fn set(&mut self, field: &str, header: &str) -> std::result::Result<(), String> {
        let slot = match field {
            "date" => &mut self.date,
            "open" => &mut self.open,
            "high" => &mut self.high,
            "low" => &mut self.low,
            "close" => &mut self.close,
            "volume" => &mut self.volume,
            other => return Err(format!("unknown field `{other}`")),
        };
        *slot = header.to_string();
        Ok(())
    }

    fn price_headers(&self) -> [&str; 5] {
        [&self.open, &self.high, &self.low, &self.close, &self.volume]
    }
}

/// What happened to the input on its way into the frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub rows_in: usize,
    pub rows_out: usize,
    pub rows_bad_date: usize,
    pub duplicate_dates: usize,
    /// Non-empty cells that did not parse as finite numbers, per column.
    pub coerced_cells: BTreeMap<String, usize>,
    /// Empty cells per column.
    pub empty_cells: BTreeMap<String, usize>,
}

fn find_header(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    let want = name.trim().to_lowercase();
    headers.iter().position(|h| h.trim().trim_start_matches('\u{feff}').to_lowercase() == want)
}

fn parse_date(cell: &str, format: Option<&str>) -> Option<Date> {
    let cell = cell.trim();
    Date::parse_from_str(cell, format.unwrap_or("%Y-%m-%d")).ok()
}

/// `None` for empty cells, `Some(NaN)` for cells that do not parse.
fn parse_number(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    Some(cell.parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(MISSING))
}

/// Reads an OHLCV file: rows are sorted by date, a repeated date keeps the
/// later row, and cells that are not numbers become missing.
pub fn parse_ohlcv_csv(path: &Path, schema: &OhlcvSchema) -> Result<(SeriesFrame, IngestStats)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let missing = |column: &str| Error::MissingColumn {
        path: path.into(),
        column: column.into(),
    };
    let date_idx = find_header(&headers, &schema.date).ok_or_else(|| missing(&schema.date))?;
    let idx: Vec<usize> = schema
        .price_headers()
        .iter()
        .map(|h| find_header(&headers, h).ok_or_else(|| missing(h)))
        .collect::<Result<_>>()?;

    let mut stats = IngestStats::default();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        stats.rows_in += 1;
        let Some(date) = rec.get(date_idx).and_then(|c| parse_date(c, schema.date_format.as_deref())) else {
            stats.rows_bad_date += 1;
            continue;
        };
        let values = idx
            .iter()
            .zip(PRICE_COLUMNS)
            .map(|(&i, name)| match parse_number(rec.get(i).unwrap_or("")) {
                None => {
                    *stats.empty_cells.entry(name.into()).or_default() += 1;
                    MISSING
                }
                Some(v) => {
                    if v.is_nan() {
                        *stats.coerced_cells.entry(name.into()).or_default() += 1;
                    }
                    v
                }
            })
            .collect();
        rows.push((date, values));
    }
    if rows.is_empty() {
        return Err(Error::NoRows { path: path.into() });
    }
    let n = rows.len();
    let frame = SeriesFrame::from_unsorted_rows(PRICE_COLUMNS.iter().map(|s| s.to_string()).collect(), rows)?;
    stats.duplicate_dates = n - frame.len();
    stats.rows_out = frame.len();
    Ok((frame, stats))
}

/// Reads fundamentals: a date column (`date` or `effective_date`) plus any
/// of the known fields, matched case-insensitively. Absent fields stay
/// missing; unknown columns are ignored.
pub fn parse_fundamentals_csv(path: &Path, date_format: Option<&str>) -> Result<Vec<FundamentalsRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let date_idx = find_header(&headers, "effective_date")
        .or_else(|| find_header(&headers, "date"))
        .ok_or_else(|| Error::MissingColumn {
            path: path.into(),
            column: "date".into(),
        })?;
    let fields: Vec<(usize, &str)> = FUNDAMENTAL_COLUMNS
        .iter()
        .filter_map(|name| find_header(&headers, name).map(|i| (i, *name)))
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = rec.get(date_idx).unwrap_or("");
        let date = parse_date(cell, date_format).ok_or_else(|| Error::Parse {
            path: path.into(),
            line,
            message: format!("unparsable date `{cell}`"),
        })?;
        let mut r = FundamentalsRecord::new(date);
        for &(i, name) in &fields {
            let v = parse_number(rec.get(i).unwrap_or("")).filter(|v| !v.is_nan());
            *r.field_mut(name).expect("known field") = v;
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub date: String,
    pub detail: String,
}

/// Data-quality summary written next to a cleaned frame.
#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    #[serde(flatten)]
    pub stats: IngestStats,
    pub forward_filled_cells: BTreeMap<String, usize>,
    pub leading_missing: BTreeMap<String, usize>,
    pub fundamentals_records: Option<usize>,
    pub ohlc_violations: Vec<Violation>,
}

impl QualityReport {
    pub fn new(stats: IngestStats, raw: &SeriesFrame, cleaned: &SeriesFrame, fundamentals_records: Option<usize>) -> Self {
        let missing = |c: &[f64]| c.iter().filter(|v| v.is_nan()).count();
        let mut forward_filled_cells = BTreeMap::new();
        for (name, col) in raw.columns() {
            let after = cleaned.column(name).map(missing).unwrap_or(0);
            forward_filled_cells.insert(name.to_string(), missing(col) - after);
        }
        let leading_missing = cleaned
            .columns()
            .map(|(n, c)| (n.to_string(), tsf_core::indicators::missing_prefix(c)))
            .filter(|(_, k)| *k > 0)
            .collect();
        let ohlc_violations = ohlc_violations(cleaned)
            .into_iter()
            .filter_map(|w| match w {
                tsf_core::Warning::OhlcViolation { date, detail } => Some(Violation {
                    date: date.to_string(),
                    detail,
                }),
                _ => None,
            })
            .collect();
        QualityReport {
            stats,
            forward_filled_cells,
            leading_missing,
            fundamentals_records,
            ohlc_violations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn rows_are_sorted_deduplicated_and_coerced() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "Date,Open,High,Low,Close,Volume\n\
             2024-01-03,3,3,3,3,30\n\
             2024-01-01,1,1,1,1,10\n\
             2024-01-02,2,2,2,n/a,20\n\
             2024-01-02,2.5,2.5,2.5,2.5,25\n",
        );
        let (f, stats) = parse_ohlcv_csv(&p, &OhlcvSchema::default()).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.dates().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(f.column("close").unwrap(), &[1.0, 2.5, 3.0]);
        assert_eq!(stats.duplicate_dates, 1);
        assert_eq!(stats.coerced_cells.get("close"), Some(&1));
        assert_eq!(stats.rows_in, 4);
    }

    #[test]
    fn unparsable_cell_becomes_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "date,open,high,low,close,volume\n2024-01-01,1,2,0.5,n/a,10\n");
        let (f, _) = parse_ohlcv_csv(&p, &OhlcvSchema::default()).unwrap();
        assert!(f.column("close").unwrap()[0].is_nan());
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn missing_mapped_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "date,open,high,low,volume\n2024-01-01,1,2,0.5,10\n");
        let err = parse_ohlcv_csv(&p, &OhlcvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("missing column `close`"), "{err}");
    }

    #[test]
    fn custom_mapping_and_date_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "Day,O,H,L,Price,Vol\n02/01/2024,1,2,0.5,1.5,10\n");
        let mut s = OhlcvSchema::default();
        for (f, h) in [("date", "Day"), ("open", "O"), ("high", "H"), ("low", "L"), ("close", "Price"), ("volume", "Vol")] {
            s.set(f, h).unwrap();
        }
        s.date_format = Some("%d/%m/%Y".into());
        let (f, _) = parse_ohlcv_csv(&p, &s).unwrap();
        assert_eq!(f.dates()[0], Date::from_ymd_opt(2024, 1, 2).unwrap());
        assert_eq!(f.column_names(), &["open", "high", "low", "close", "volume"]);
    }

    #[test]
    fn no_parsable_rows_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "date,open,high,low,close,volume\nnot-a-date,1,1,1,1,1\n");
        assert!(matches!(parse_ohlcv_csv(&p, &OhlcvSchema::default()), Err(Error::NoRows { .. })));
    }

    #[test]
    fn fundamentals_are_sparse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "f.csv", "Date,EQUITY,SALES,Other\n2024-01-01,100,,x\n2023-06-30,90,50,y\n");
        let recs = parse_fundamentals_csv(&p, None).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].equity, Some(100.0));
        assert_eq!(recs[0].sales, None);
        assert_eq!(recs[1].sales, Some(50.0));
        assert_eq!(recs[0].face_value, None);
    }
}
