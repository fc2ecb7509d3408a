//! Mini-batch training with per-epoch validation and best-epoch retention.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::neural::model::{init_params_for, predict, Architecture, ModelParams};
use crate::neural::tensor::Tensor3;
use crate::neural::{adam_step, mse_loss, model_backward, model_forward, AdamConfig, AdamState, ForwardMode};
use crate::preprocess::{ScalerParams, WindowedDataset};
use crate::rng::{derive, Rng, RngSeed};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Gate block order along the `4 * hidden` axis of every LSTM weight.
pub const GATE_ORDER: [&str; 4] = ["input", "forget", "cell", "output"];

/// Samples per forward pass when scoring a dataset in inference mode.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lookback: usize,
    pub train_fraction: f64,
    pub seed: RngSeed,
    /// Shuffle training windows within each epoch.
    pub shuffle: bool,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout_rate: f64,
    pub adam: AdamConfig,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 32,
            lookback: 60,
            train_fraction: 0.8,
            seed: RngSeed(0),
            shuffle: true,
            hidden1: 64,
            hidden2: 64,
            dropout_rate: 0.2,
            adam: AdamConfig::default(),
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if self.lookback < 1 {
            return Err(Error::invalid("lookback", "must be >= 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", "must lie strictly between 0 and 1"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid("clip_norm", "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn architecture(&self, input_size: usize) -> Architecture {
        Architecture {
            input_size,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            dropout_rate: self.dropout_rate,
        }
    }
}

/// Everything needed to reproduce predictions: weights, the scaler they
/// were trained against and the feature manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub lookback: usize,
    pub train_fraction: f64,
    pub params: ModelParams,
    pub scaler: ScalerParams,
    /// Input columns in tensor order.
    pub manifest: Vec<String>,
    pub target_column: String,
    pub best_val_loss: f64,
    /// 1-based epoch the weights come from.
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn architecture(&self) -> Architecture {
        self.params.architecture()
    }

    /// Cross-checks weights, manifest, scaler and target.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let arch = self.architecture();
        if self.manifest.len() != arch.input_size {
            return Err(Error::Shape {
                what: "manifest length",
                expected: arch.input_size,
                actual: self.manifest.len(),
            });
        }
        if self.scaler.columns.len() != self.manifest.len() {
            return Err(Error::Shape {
                what: "scaler columns",
                expected: self.manifest.len(),
                actual: self.scaler.columns.len(),
            });
        }
        for (index, (m, s)) in self.manifest.iter().zip(&self.scaler.columns).enumerate() {
            if *m != s.name {
                return Err(Error::ColumnMismatch {
                    index,
                    expected: m.clone(),
                    found: s.name.clone(),
                });
            }
        }
        if !self.manifest.contains(&self.target_column) {
            return Err(Error::UnknownColumn(self.target_column.clone()));
        }
        if self.lookback < 1 {
            return Err(Error::invalid("lookback", "must be >= 1"));
        }
        Ok(())
    }

    /// Checks that `names` equals the manifest, naming the first difference.
    pub fn check_manifest<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        for index in 0..self.manifest.len().max(names.len()) {
            let expected = self.manifest.get(index).map_or("<none>", String::as_str);
            let found = names.get(index).map_or("<none>", |s| s.as_ref());
            if expected != found {
                return Err(Error::ColumnMismatch {
                    index,
                    expected: expected.to_owned(),
                    found: found.to_owned(),
                });
            }
        }
        Ok(())
    }

    pub fn target_index(&self) -> Result<usize> {
        self.manifest
            .iter()
            .position(|m| *m == self.target_column)
            .ok_or_else(|| Error::UnknownColumn(self.target_column.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based; the first epoch reaching the minimum validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub optimizer_steps: u64,
    /// Filled in by callers that have a clock.
    pub wall_time_secs: Option<f64>,
}

/// 1-based index of the first minimum. `None` for an empty slice.
pub fn best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in val_losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i + 1)
}

/// Inference-mode predictions for every sample of `inputs`.
pub fn predict_all(params: &ModelParams, inputs: &Tensor3) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(inputs.batch);
    let mut start = 0;
    while start < inputs.batch {
        let end = (start + EVAL_CHUNK).min(inputs.batch);
        out.extend(predict(params, &inputs.slice_batch(start..end))?);
        start = end;
    }
    Ok(out)
}

/// Inference-mode MSE over a dataset. Parameters are only read.
pub fn validation_loss(params: &ModelParams, data: &WindowedDataset) -> Result<f64> {
    let pred = predict_all(params, &data.inputs)?;
    Ok(mse_loss(&pred, &data.targets)?.0)
}

/// [`train_observed`] without an observer.
pub fn train(
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    scaler: &ScalerParams,
    config: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    train_observed(train_set, val_set, scaler, config, |_| {})
}

/// Trains from a fresh seeded initialization.
///
/// Each epoch runs `ceil(n_train / batch_size)` Adam steps (the last batch
/// may be partial), then scores the validation set in inference mode. The
/// returned checkpoint holds the weights of the epoch with the lowest
/// validation loss; `observer` sees every epoch as it finishes.
pub fn train_observed(
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    scaler: &ScalerParams,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochStats),
) -> Result<(Checkpoint, TrainReport)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if train_set.lookback() != config.lookback || val_set.lookback() != config.lookback {
        return Err(Error::Shape {
            what: "lookback",
            expected: config.lookback,
            actual: train_set.lookback(),
        });
    }
    if val_set.n_features() != train_set.n_features() {
        return Err(Error::Shape {
            what: "validation features",
            expected: train_set.n_features(),
            actual: val_set.n_features(),
        });
    }

    let seed = config.seed.0;
    let arch = config.architecture(train_set.n_features());
    let mut params = init_params_for(&arch, config.seed)?;
    let mut adam = AdamState::new(config.adam, &params);
    let n = train_set.len();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if config.shuffle {
            Rng::new(derive(seed, &[0x5EED, epoch as u64])).shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.gather(chunk);
            let mode = ForwardMode::Training {
                seed: derive(seed, &[0xD20, epoch as u64, bi as u64]),
            };
            let (pred, cache) = model_forward(&params, &x, mode)?;
            let (loss, grad_pred) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, &epochs));
            }
            let (mut grads, _) = model_backward(&params, &cache, &grad_pred)?;
            if let Some(limit) = config.clip_norm {
                let norm = grads.global_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            adam_step(&mut params, &grads, &mut adam).map_err(|e| match e {
                Error::NonFinite { .. } => diverged(epoch, &epochs),
                other => other,
            })?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / n as f64;
        let val_loss = validation_loss(&params, val_set)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(diverged(epoch, &epochs));
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss,
            val_loss,
        };
        observer(&stats);
        epochs.push(stats);
        if best.as_ref().is_none_or(|(_, b, _)| val_loss < *b) {
            best = Some((epoch + 1, val_loss, params.clone()));
        }
    }

    let (best_epoch, best_val_loss, best_params) = best.expect("at least one epoch ran");
    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        lookback: config.lookback,
        train_fraction: config.train_fraction,
        params: best_params,
        scaler: scaler.clone(),
        manifest: train_set.feature_names.clone(),
        target_column: train_set.target_column.clone(),
        best_val_loss,
        best_epoch,
    };
    checkpoint.validate()?;
    let report = TrainReport {
        epochs,
        best_epoch,
        best_val_loss,
        optimizer_steps: adam.t,
        wall_time_secs: None,
    };
    Ok((checkpoint, report))
}

fn diverged(epoch0: usize, done: &[EpochStats]) -> Error {
    Error::Diverged {
        epoch: epoch0 + 1,
        last_finite_epoch: done.last().map(|s| s.epoch),
    }
}

/// Scaled one-step predictions for a batch of windows.
pub fn predict_batch(checkpoint: &Checkpoint, inputs: &Tensor3) -> Result<Vec<f64>> {
    if inputs.width != checkpoint.manifest.len() {
        return Err(Error::Shape {
            what: "input features",
            expected: checkpoint.manifest.len(),
            actual: inputs.width,
        });
    }
    if inputs.steps != checkpoint.lookback {
        return Err(Error::Shape {
            what: "lookback",
            expected: checkpoint.lookback,
            actual: inputs.steps,
        });
    }
    predict_all(&checkpoint.params, inputs)
}
