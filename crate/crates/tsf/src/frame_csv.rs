//! Canonical frame files: a `date` column in ISO-8601 followed by numeric
//! columns, empty cells for missing values.

use std::path::Path;

use tsf_core::{Date, SeriesFrame, MISSING};

use crate::error::{Error, Result};
use crate::fsutil::{fmt_f64, write_csv};

pub fn write_frame(path: &Path, frame: &SeriesFrame) -> Result<()> {
    write_csv(path, |w| {
        let mut header = vec!["date".to_string()];
        header.extend(frame.column_names().iter().cloned());
        w.write_record(&header)?;
        for (i, date) in frame.dates().iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            rec.extend(frame.columns().map(|(_, c)| fmt_f64(c[i])));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn read_frame(path: &Path) -> Result<SeriesFrame> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.get(0) != Some("date") {
        return Err(Error::MissingColumn {
            path: path.into(),
            column: "date".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let d = Date::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| parse_err(format!("date `{}`: {e}", &rec[0])))?;
        dates.push(d);
        for (c, col) in columns.iter_mut().enumerate() {
            let cell = rec.get(c + 1).unwrap_or("").trim();
            let v = if cell.is_empty() {
                MISSING
            } else {
                cell.parse::<f64>()
                    .map_err(|_| parse_err(format!("column `{}`: `{cell}` is not a number", names[c])))?
            };
            col.push(v);
        }
    }
    Ok(SeriesFrame::new(dates, names.into_iter().zip(columns).collect())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trips_bit_exactly() {
        let dates = vec![
            Date::from_ymd_opt(2024, 1, 2).unwrap(),
            Date::from_ymd_opt(2024, 1, 3).unwrap(),
        ];
        let f = SeriesFrame::new(
            dates,
            vec![
                ("close".into(), vec![0.1 + 0.2, f64::NAN]),
                ("volume".into(), vec![1e300, 5e-324]),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_frame(&p, &f).unwrap();
        let g = read_frame(&p).unwrap();
        assert_eq!(g.dates(), f.dates());
        assert_eq!(g.column_names(), f.column_names());
        for ((_, a), (_, b)) in f.columns().zip(g.columns()) {
            let ab: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }
}
