#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use tsf_core::evaluation::next_trading_day;
use tsf_core::rng::Rng;
use tsf_core::{Date, SeriesFrame};

pub fn trading_days(start: Date, n: usize) -> Vec<Date> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(d);
        d = next_trading_day(d);
    }
    out
}

fn gaussian(rng: &mut Rng) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Trend times (1 + AR(1)) close with OHLCV columns built around it.
pub fn trend_ar1_frame(n: usize, seed: u64) -> SeriesFrame {
    let mut rng = Rng::new(seed);
    let dates = trading_days(Date::from_ymd_opt(2015, 1, 5).unwrap(), n);
    let mut x = 0.0;
    let mut close = Vec::with_capacity(n);
    for t in 0..n {
        x = 0.95 * x + 0.01 * gaussian(&mut rng);
        close.push(100.0 * (0.0004 * t as f64).exp() * (1.0 + x));
    }
    let mut open = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    let mut low = Vec::with_capacity(n);
    let mut volume = Vec::with_capacity(n);
    for t in 0..n {
        let o = if t == 0 { close[0] } else { close[t - 1] };
        let c = close[t];
        open.push(o);
        high.push(o.max(c) * (1.0 + 0.002 * rng.next_f64()));
        low.push(o.min(c) * (1.0 - 0.002 * rng.next_f64()));
        volume.push(1e5 * (1.0 + rng.next_f64()));
    }
    SeriesFrame::new(
        dates,
        vec![
            ("open".into(), open),
            ("high".into(), high),
            ("low".into(), low),
            ("close".into(), close),
            ("volume".into(), volume),
        ],
    )
    .unwrap()
}

/// Writes a frame as a raw OHLCV CSV with capitalised headers.
pub fn write_raw_csv(path: &Path, frame: &SeriesFrame) {
    let mut s = String::from("Date,Open,High,Low,Close,Volume\n");
    let cols: Vec<&[f64]> = ["open", "high", "low", "close", "volume"]
        .iter()
        .map(|c| frame.column(c).unwrap())
        .collect();
    for (i, d) in frame.dates().iter().enumerate() {
        write!(s, "{d}").unwrap();
        for c in &cols {
            write!(s, ",{}", c[i]).unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}
