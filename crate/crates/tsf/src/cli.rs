//! Command-line front end. Each subcommand runs one pipeline stage and
//! writes its artifacts atomically.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tsf_core::attribution::{aggregate_attribution, attribute, Baseline, DEFAULT_STEPS};
use tsf_core::evaluation::{evaluate, forecast_recursive};
use tsf_core::frame::{forward_fill, forward_fill_all, merge_fundamentals, trim_incomplete_prefix};
use tsf_core::indicators::{build_feature_frame, pearson_matrix, IndicatorConfig};
use tsf_core::preprocess::{prepare, prepare_with_scaler, PreparedData, SplitSpec};
use tsf_core::rng::RngSeed;
use tsf_core::trainer::{train_observed, Checkpoint, TrainConfig};
use tsf_core::SeriesFrame;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::frame_csv::{read_frame, write_frame};
use crate::fsutil::{read_json, write_json};
use crate::ingest::{parse_fundamentals_csv, parse_ohlcv_csv, OhlcvSchema, QualityReport};
use crate::manifest::{sidecar_path, RunManifest};
use crate::reports::{
    manifest_path, write_attribution, write_correlation, write_evaluation, write_forecast, write_train_report,
    FeatureManifest,
};

/// Default output root when `--out` is omitted.
pub const OUTPUT_ROOT_ENV: &str = "TSF_OUTPUT_ROOT";

static QUIET: AtomicBool = AtomicBool::new(false);

fn log(stage: &str, msg: impl AsRef<str>) {
    if !QUIET.load(Ordering::Relaxed) {
        eprintln!("[{stage}] {}", msg.as_ref());
    }
}

#[derive(Debug, Parser)]
#[command(name = "tsf", version, about = "LSTM next-day price forecasting pipeline")]
pub struct Cli {
    /// Instrument label used in reports and default output paths.
    #[arg(long, global = true)]
    pub ticker: Option<String>,

    /// Suppress stage logs on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, clean and merge raw CSV input into a canonical frame.
    Ingest(IngestArgs),
    /// Append engineered features and trim the warm-up rows.
    Features(FeaturesArgs),
    /// Train a model and save the best-validation checkpoint.
    Train(TrainArgs),
    /// Score one-step-ahead predictions on the test partition.
    Evaluate(EvaluateArgs),
    /// Project prices past the end of the data.
    Forecast(ForecastArgs),
    /// Integrated Gradients attribution for one test window.
    Attribute(AttributeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub ohlcv: PathBuf,
    #[arg(long)]
    pub fundamentals: Option<PathBuf>,
    /// Cleaned frame CSV; a `.quality.json` report is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// strftime-style pattern for the raw date column (default ISO-8601).
    #[arg(long)]
    pub date_format: Option<String>,
    /// Header mapping override, `field=Header` (fields: date, open, high, low, close, volume).
    #[arg(long = "map", value_name = "FIELD=HEADER")]
    pub map: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON indicator configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Square Pearson correlation CSV over every column.
    #[arg(long)]
    pub corr_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    pub lookback: u32,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch: u32,
    /// Training fraction of the windowed samples.
    #[arg(long, default_value_t = 0.8, value_parser = parse_fraction)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Units in each LSTM layer.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub hidden: u32,
    #[arg(long, default_value_t = 0.2, value_parser = parse_rate)]
    pub dropout: f64,
    #[arg(long, default_value = "close")]
    pub target: String,
    /// Keep training windows in chronological order within each epoch.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Checkpoint path; `.train.csv` and `.run.json` are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub horizon: u32,
    /// Indicator configuration; defaults to the one recorded next to the features.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// `last` or a 0-based index into the test windows.
    #[arg(long, default_value = "last")]
    pub sample: SampleSel,
    #[arg(long, default_value_t = DEFAULT_STEPS as u32, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps: u32,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleSel {
    Last,
    Index(usize),
}

impl FromStr for SampleSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "last" {
            return Ok(SampleSel::Last);
        }
        s.parse()
            .map(SampleSel::Index)
            .map_err(|_| format!("expected `last` or a sample index, got `{s}`"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1)".into())
    }
}

fn ticker_for(cli: &Option<String>, input: &Path) -> String {
    cli.clone().unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into())
    })
}

/// `--out` if given, else `$TSF_OUTPUT_ROOT/<ticker>/<default_name>`.
fn resolve_out(out: &Option<PathBuf>, ticker: &str, default_name: &str) -> anyhow::Result<PathBuf> {
    if let Some(p) = out {
        return Ok(p.clone());
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => Ok(PathBuf::from(root).join(ticker).join(default_name)),
        None => bail!("--out not given and {OUTPUT_ROOT_ENV} is not set"),
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&cli, a),
        Command::Features(a) => cmd_features(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Evaluate(a) => cmd_evaluate(&cli, a),
        Command::Forecast(a) => cmd_forecast(&cli, a),
        Command::Attribute(a) => cmd_attribute(&cli, a),
    }
}

pub fn cmd_ingest(cli: &Cli, a: &IngestArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.ohlcv);
    let out = resolve_out(&a.out, &ticker, "clean.csv")?;
    let mut schema = OhlcvSchema {
        date_format: a.date_format.clone(),
        ..OhlcvSchema::default()
    };
    for m in &a.map {
        let (field, header) = m
            .split_once('=')
            .ok_or_else(|| anyhow!("--map expects FIELD=HEADER, got `{m}`"))?;
        schema.set(field.trim(), header.trim()).map_err(|e| anyhow!(e))?;
    }
    let mut run = RunManifest::new("ingest", &ticker, &schema, None, &parent_dir(&out));
    run.input("ohlcv", &a.ohlcv);

    let (raw, stats) = run.stage("parse", || parse_ohlcv_csv(&a.ohlcv, &schema))?;
    log("ingest", format!("{} rows read, {} kept", stats.rows_in, stats.rows_out));
    let mut frame = forward_fill_all(&raw);
    let mut n_records = None;
    if let Some(fpath) = &a.fundamentals {
        run.input("fundamentals", fpath);
        let records = run.stage("fundamentals", || parse_fundamentals_csv(fpath, a.date_format.as_deref()))?;
        log("ingest", format!("{} fundamentals records merged", records.len()));
        n_records = Some(records.len());
        let merged = forward_fill_all(&merge_fundamentals(&frame, &records)?);
        // fields the file never reports would leave no complete row downstream
        let (keep, empty): (Vec<&str>, Vec<&str>) = merged
            .columns()
            .map(|(name, _)| name)
            .partition(|name| frame.has_column(name) || !merged.column(name).unwrap().iter().all(|v| v.is_nan()));
        if !empty.is_empty() {
            log("ingest", format!("dropped fundamentals fields with no values: {}", empty.join(", ")));
        }
        frame = merged.select(&keep)?;
    }
    let quality = QualityReport::new(stats, &raw, &frame, n_records);
    for v in &quality.ohlc_violations {
        log("ingest", format!("warning: OHLC violation on {}: {}", v.date, v.detail));
    }
    let qpath = out.with_extension("quality.json");
    write_frame(&out, &frame)?;
    write_json(&qpath, &quality)?;
    run.output(&out);
    run.output(&qpath);
    run.write(&sidecar_path(&out))?;
    log("ingest", format!("wrote {}", out.display()));
    Ok(())
}

/// Where an indicator configuration came from, for the stage log.
fn load_indicator_config(explicit: &Option<PathBuf>, features: &Path, frame: &SeriesFrame) -> anyhow::Result<(IndicatorConfig, String)> {
    if let Some(p) = explicit {
        return Ok((read_json(p)?, p.display().to_string()));
    }
    let sidecar = manifest_path(features);
    if sidecar.exists() {
        let m: FeatureManifest = read_json(&sidecar)?;
        return Ok((m.indicator_config, sidecar.display().to_string()));
    }
    let default = IndicatorConfig::default();
    if default.feature_names().iter().all(|n| frame.has_column(n)) {
        Ok((default, "defaults (no sidecar found)".into()))
    } else {
        Ok((IndicatorConfig::none(), "none (no sidecar found)".into()))
    }
}

pub fn cmd_features(cli: &Cli, a: &FeaturesArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.input);
    let out = resolve_out(&a.out, &ticker, "features.csv")?;
    let cfg: IndicatorConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => IndicatorConfig::default(),
    };
    cfg.validate()?;
    let mut run = RunManifest::new("features", &ticker, &cfg, None, &parent_dir(&out));
    run.input("frame", &a.input);
    if let Some(p) = &a.config {
        run.input("config", p);
    }

    let frame = read_frame(&a.input)?;
    let built = run.stage("indicators", || build_feature_frame(&frame, &cfg))?;
    for w in &built.warnings {
        log("features", format!("warning: {w}"));
    }
    log("features", format!("warm-up trim: {} rows", built.trimmed));
    let engineered = cfg.feature_names();
    let before = built.frame.columns().map(|(_, c)| c.iter().filter(|v| v.is_nan()).count()).sum::<usize>();
    let filled = forward_fill(&built.frame, &engineered)?;
    let after = filled.columns().map(|(_, c)| c.iter().filter(|v| v.is_nan()).count()).sum::<usize>();
    let (features, incomplete) = trim_incomplete_prefix(&filled);
    if incomplete > 0 {
        log("features", format!("dropped {incomplete} further leading rows with missing inputs"));
    }
    if before > after {
        log("features", format!("forward-filled {} gaps in engineered columns", before - after));
    }
    if features.is_empty() {
        bail!("no complete rows remain after trimming");
    }
    let manifest = FeatureManifest {
        columns: features.column_names().to_vec(),
        indicator_config: cfg.clone(),
        warmup_trimmed: built.trimmed,
        incomplete_trimmed: incomplete,
        filled_cells: before - after,
    };
    write_frame(&out, &features)?;
    let mpath = manifest_path(&out);
    write_json(&mpath, &manifest)?;
    run.output(&out);
    run.output(&mpath);
    if let Some(cpath) = &a.corr_out {
        let m = run.stage("correlation", || pearson_matrix(&features, features.column_names()))?;
        for w in &m.warnings {
            log("features", format!("warning: {w}"));
        }
        write_correlation(cpath, &m)?;
        run.output(cpath);
    }
    run.write(&sidecar_path(&out))?;
    log("features", format!("wrote {} ({} rows, {} columns)", out.display(), features.len(), features.n_columns()));
    Ok(())
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        epochs: a.epochs as usize,
        batch_size: a.batch as usize,
        lookback: a.lookback as usize,
        train_fraction: a.split,
        seed: RngSeed(a.seed),
        shuffle: !a.no_shuffle,
        hidden1: a.hidden as usize,
        hidden2: a.hidden as usize,
        dropout_rate: a.dropout,
        ..TrainConfig::default()
    }
}

pub fn cmd_train(cli: &Cli, a: &TrainArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.features);
    let out = resolve_out(&a.out, &ticker, "model.tsfck")?;
    let cfg = train_config(a);
    #[derive(Serialize)]
    struct Config<'a> {
        train: &'a TrainConfig,
        target: &'a str,
    }
    let mut run = RunManifest::new(
        "train",
        &ticker,
        &Config {
            train: &cfg,
            target: &a.target,
        },
        Some(a.seed),
        &parent_dir(&out),
    );
    run.input("features", &a.features);

    let frame = read_frame(&a.features)?;
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
        lookback: cfg.lookback,
    };
    let data = prepare(&frame, &spec, &a.target)?;
    log(
        "train",
        format!(
            "{} features, {} train / {} validation windows",
            data.train.n_features(),
            data.train.len(),
            data.test.len()
        ),
    );
    let started = Instant::now();
    let (checkpoint, mut report) = run.stage("train", || {
        train_observed(&data.train, &data.test, &data.scaler, &cfg, |e| {
            log(
                "train",
                format!("epoch {:>3}  train_loss {:.6e}  val_loss {:.6e}", e.epoch, e.train_loss, e.val_loss),
            )
        })
    })?;
    report.wall_time_secs = Some(started.elapsed().as_secs_f64());
    log(
        "train",
        format!("best epoch {} (val_loss {:.6e})", report.best_epoch, report.best_val_loss),
    );
    let rpath = out.with_extension("train.csv");
    save_checkpoint(&checkpoint, &out)?;
    write_train_report(&rpath, &report)?;
    run.output(&out);
    run.output(&rpath);
    run.metrics.insert("best_epoch".into(), report.best_epoch as f64);
    run.metrics.insert("best_val_loss".into(), report.best_val_loss);
    run.metrics.insert("wall_time_secs".into(), report.wall_time_secs.unwrap_or(0.0));
    run.write(&sidecar_path(&out))?;
    log("train", format!("wrote {}", out.display()));
    Ok(())
}

/// Loads a checkpoint and a feature frame and checks they agree.
fn load_pair(checkpoint: &Path, features: &Path) -> anyhow::Result<(Checkpoint, SeriesFrame)> {
    let ck = load_checkpoint(checkpoint)?;
    let frame = read_frame(features)?;
    ck.check_manifest(frame.column_names())
        .with_context(|| format!("{} does not match the checkpoint's feature manifest", features.display()))?;
    Ok((ck, frame))
}

fn test_partition(ck: &Checkpoint, frame: &SeriesFrame) -> anyhow::Result<PreparedData> {
    let spec = SplitSpec {
        train_fraction: ck.train_fraction,
        lookback: ck.lookback,
    };
    Ok(prepare_with_scaler(frame, &spec, &ck.target_column, ck.scaler.clone())?)
}

pub fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.features);
    let dir = resolve_out(&a.out, &ticker, "evaluation")?;
    let mut run = RunManifest::new("evaluate", &ticker, &serde_json::json!({}), None, &dir);
    run.input("checkpoint", &a.checkpoint);
    run.input("features", &a.features);
    let (ck, frame) = load_pair(&a.checkpoint, &a.features)?;
    let data = test_partition(&ck, &frame)?;
    let result = run.stage("evaluate", || evaluate(&ck, &data.test))?;
    let summary = write_evaluation(&dir, &ticker, &ck.target_column, &result)?;
    run.output(&dir.join("evaluation.csv"));
    run.output(&dir.join("evaluation.json"));
    run.metrics.insert("r2".into(), summary.r2);
    run.write(&dir.join("run.json"))?;
    log("evaluate", format!("R² = {:.4} over {} test windows", summary.r2, summary.n_test));
    Ok(())
}

pub fn cmd_forecast(cli: &Cli, a: &ForecastArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.features);
    let out = resolve_out(&a.out, &ticker, "forecast.csv")?;
    let (ck, frame) = load_pair(&a.checkpoint, &a.features)?;
    let (cfg, source) = load_indicator_config(&a.config, &a.features, &frame)?;
    log("forecast", format!("indicator configuration: {source}"));
    #[derive(Serialize)]
    struct Config<'a> {
        horizon: u32,
        indicators: &'a IndicatorConfig,
    }
    let mut run = RunManifest::new(
        "forecast",
        &ticker,
        &Config {
            horizon: a.horizon,
            indicators: &cfg,
        },
        None,
        &parent_dir(&out),
    );
    run.input("checkpoint", &a.checkpoint);
    run.input("features", &a.features);
    let path = run.stage("forecast", || forecast_recursive(&ck, &frame, &cfg, a.horizon as usize))?;
    for w in &path.warnings {
        log("forecast", format!("warning: {w}"));
    }
    write_forecast(&out, &path)?;
    run.output(&out);
    run.write(&sidecar_path(&out))?;
    log("forecast", format!("wrote {} steps to {}", path.len(), out.display()));
    Ok(())
}

pub fn cmd_attribute(cli: &Cli, a: &AttributeArgs) -> anyhow::Result<()> {
    let ticker = ticker_for(&cli.ticker, &a.features);
    let dir = resolve_out(&a.out, &ticker, "attribution")?;
    let (ck, frame) = load_pair(&a.checkpoint, &a.features)?;
    let data = test_partition(&ck, &frame)?;
    let n = data.test.len();
    let index = match a.sample {
        SampleSel::Last => n - 1,
        SampleSel::Index(i) if i < n => i,
        SampleSel::Index(i) => bail!("sample index {i} is out of range: the test partition has {n} windows"),
    };
    #[derive(Serialize)]
    struct Config {
        sample: usize,
        steps: u32,
        baseline: &'static str,
    }
    let baseline = Baseline::ScaledZero;
    let mut run = RunManifest::new(
        "attribute",
        &ticker,
        &Config {
            sample: index,
            steps: a.steps,
            baseline: baseline.descriptor(),
        },
        None,
        &dir,
    );
    run.input("checkpoint", &a.checkpoint);
    run.input("features", &a.features);

    let x = data.test.inputs.slice_batch(index..index + 1);
    let result = run.stage("integrated_gradients", || attribute(&ck, &x, &baseline, a.steps as usize))?;
    let ranking = aggregate_attribution(std::slice::from_ref(&result))?;
    let target_date = data.test.sample_dates[index];
    let end = frame
        .dates()
        .iter()
        .position(|d| *d == target_date)
        .expect("sample date comes from the frame");
    let row_dates = &frame.dates()[end - ck.lookback..end];
    let summary = write_attribution(&dir, &ticker, index, target_date, row_dates, &result, &ranking)?;
    run.output(&dir.join("attribution.csv"));
    run.output(&dir.join("ranking.json"));
    run.metrics.insert("completeness_gap".into(), summary.completeness_gap);
    run.write(&dir.join("run.json"))?;
    log(
        "attribute",
        format!(
            "sample {index} ({target_date}): top feature `{}`, completeness gap {:.3e}",
            summary.ranking[0].feature, summary.completeness_gap
        ),
    );
    Ok(())
}
