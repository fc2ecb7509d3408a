//! CSV and JSON artifacts written by the pipeline stages.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tsf_core::attribution::{AttributionResult, FeatureImportance};
use tsf_core::evaluation::{EvaluationResult, ForecastPath};
use tsf_core::indicators::{CorrelationMatrix, IndicatorConfig};
use tsf_core::trainer::TrainReport;
use tsf_core::Date;

use crate::error::Result;
use crate::fsutil::{fmt_f64, write_csv, write_json};

/// Sidecar describing a feature frame, stored next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    /// Column order of the frame, excluding `date`.
    pub columns: Vec<String>,
    pub indicator_config: IndicatorConfig,
    /// Leading rows dropped while indicators warmed up.
    pub warmup_trimmed: usize,
    /// Further leading rows dropped because some input was still missing.
    pub incomplete_trimmed: usize,
    /// Interior gaps in engineered columns filled from the previous row.
    pub filled_cells: usize,
}

/// `features.csv` -> `features.manifest.json`.
pub fn manifest_path(frame_path: &Path) -> std::path::PathBuf {
    frame_path.with_extension("manifest.json")
}

pub fn write_train_report(path: &Path, report: &TrainReport) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for e in &report.epochs {
            w.write_record([e.epoch.to_string(), fmt_f64(e.train_loss), fmt_f64(e.val_loss)])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub ticker: String,
    pub r2: f64,
    pub n_test: usize,
    pub target_column: String,
    pub first_date: String,
    pub last_date: String,
}

pub fn write_evaluation(dir: &Path, ticker: &str, target: &str, r: &EvaluationResult) -> Result<EvaluationSummary> {
    write_csv(&dir.join("evaluation.csv"), |w| {
        w.write_record(["date", "actual", "predicted", "residual"])?;
        for i in 0..r.len() {
            w.write_record([
                r.dates[i].to_string(),
                fmt_f64(r.actual[i]),
                fmt_f64(r.predicted[i]),
                fmt_f64(r.residuals[i]),
            ])?;
        }
        Ok(())
    })?;
    let summary = EvaluationSummary {
        ticker: ticker.to_string(),
        r2: r.r2,
        n_test: r.len(),
        target_column: target.to_string(),
        first_date: r.dates.first().map(Date::to_string).unwrap_or_default(),
        last_date: r.dates.last().map(Date::to_string).unwrap_or_default(),
    };
    write_json(&dir.join("evaluation.json"), &summary)?;
    Ok(summary)
}

pub fn write_forecast(path: &Path, f: &ForecastPath) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(["date", "projected_close"])?;
        for (d, v) in f.dates.iter().zip(&f.values) {
            w.write_record([d.to_string(), fmt_f64(*v)])?;
        }
        Ok(())
    })
}

pub fn write_correlation(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    write_csv(path, |w| {
        let mut header = vec![String::new()];
        header.extend(m.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in m.labels.iter().zip(&m.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub feature: String,
    pub mean_abs_attribution: f64,
    /// Signed sum over timesteps for this sample.
    pub attribution: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub ticker: String,
    pub sample_index: usize,
    pub target_date: String,
    pub steps: usize,
    pub scheme: String,
    pub baseline: String,
    pub f_x: f64,
    pub f_baseline: f64,
    pub completeness_gap: f64,
    pub relative_completeness_gap: Option<f64>,
    pub ranking: Vec<RankedFeature>,
}

/// `attribution.csv` (one row per timestep, oldest first) and `ranking.json`.
pub fn write_attribution(
    dir: &Path,
    ticker: &str,
    sample_index: usize,
    target_date: Date,
    row_dates: &[Date],
    r: &AttributionResult,
    ranking: &[FeatureImportance],
) -> Result<AttributionSummary> {
    write_csv(&dir.join("attribution.csv"), |w| {
        let mut header = vec!["timestep".to_string(), "date".to_string()];
        header.extend(r.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in r.matrix.iter().enumerate() {
            let mut rec = vec![t.to_string(), row_dates[t].to_string()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    let summary = AttributionSummary {
        ticker: ticker.to_string(),
        sample_index,
        target_date: target_date.to_string(),
        steps: r.steps,
        scheme: r.scheme.to_string(),
        baseline: r.baseline.to_string(),
        f_x: r.f_x,
        f_baseline: r.f_baseline,
        completeness_gap: r.completeness_gap,
        relative_completeness_gap: r.relative_gap,
        ranking: ranking
            .iter()
            .enumerate()
            .map(|(i, f)| RankedFeature {
                rank: i + 1,
                feature: f.feature.clone(),
                mean_abs_attribution: f.mean_abs_attribution,
                attribution: r.aggregate[f.index],
            })
            .collect(),
    };
    write_json(&dir.join("ranking.json"), &summary)?;
    Ok(summary)
}
