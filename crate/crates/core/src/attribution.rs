//! Integrated Gradients over input windows, and ranking of features by
//! mean absolute attribution.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::neural::model::{model_backward, model_forward, predict, ForwardMode, ModelParams};
use crate::neural::tensor::Tensor3;
use crate::trainer::Checkpoint;

pub const DEFAULT_STEPS: usize = 256;

/// Interpolation points evaluated per forward/backward pass.
const PATH_CHUNK: usize = 64;

/// A scalar-output model that can differentiate its output with respect to
/// its inputs, in inference mode.
pub trait InputGradient {
    fn n_features(&self) -> usize;

    /// Required window length, if the model fixes one.
    fn lookback(&self) -> Option<usize> {
        None
    }

    fn outputs(&self, x: &Tensor3) -> Result<Vec<f64>>;

    /// `d output_b / d x_b` for every sample `b`.
    fn input_gradients(&self, x: &Tensor3) -> Result<Tensor3>;
}

impl InputGradient for ModelParams {
    fn n_features(&self) -> usize {
        self.layer1.input_size
    }

    fn outputs(&self, x: &Tensor3) -> Result<Vec<f64>> {
        predict(self, x)
    }

    fn input_gradients(&self, x: &Tensor3) -> Result<Tensor3> {
        let (_, cache) = model_forward(self, x, ForwardMode::Inference)?;
        // Samples are independent, so a unit seed per output yields each
        // sample's own input gradient.
        let ones = vec![1.0; x.batch];
        Ok(model_backward(self, &cache, &ones)?.1)
    }
}

impl InputGradient for Checkpoint {
    fn n_features(&self) -> usize {
        self.manifest.len()
    }

    fn lookback(&self) -> Option<usize> {
        Some(self.lookback)
    }

    fn outputs(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.params.outputs(x)
    }

    fn input_gradients(&self, x: &Tensor3) -> Result<Tensor3> {
        self.params.input_gradients(x)
    }
}

/// Reference input the path starts from.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// All zeros in scaled space, i.e. every feature at its training minimum.
    ScaledZero,
    Window(Tensor3),
}

impl Baseline {
    pub fn descriptor(&self) -> &'static str {
        match self {
            Baseline::ScaledZero => "scaled_zero",
            Baseline::Window(_) => "custom_window",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    /// `lookback x n_features`.
    pub matrix: Vec<Vec<f64>>,
    /// Column sums of `matrix`, accumulated over timesteps in order.
    pub aggregate: Vec<f64>,
    pub feature_names: Vec<String>,
    pub baseline: &'static str,
    pub steps: usize,
    pub scheme: &'static str,
    pub f_x: f64,
    pub f_baseline: f64,
    /// `sum(attributions) - (f_x - f_baseline)`.
    pub completeness_gap: f64,
    /// `|gap| / |f_x - f_baseline|`; `None` when the outputs coincide.
    pub relative_gap: Option<f64>,
}

impl AttributionResult {
    pub fn total(&self) -> f64 {
        self.aggregate.iter().sum()
    }
}

/// Right-endpoint Riemann approximation of Integrated Gradients for one
/// window `x` (batch 1):
/// `IG = (x - b) * (1/steps) * sum_{k=1..steps} grad F(b + k/steps * (x - b))`.
pub fn integrated_gradients<M: InputGradient + ?Sized>(
    model: &M,
    feature_names: &[String],
    x: &Tensor3,
    baseline: &Baseline,
    steps: usize,
) -> Result<AttributionResult> {
    if steps < 1 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    if x.batch != 1 {
        return Err(Error::Shape {
            what: "attribution batch",
            expected: 1,
            actual: x.batch,
        });
    }
    if x.width != model.n_features() {
        return Err(Error::Shape {
            what: "input features",
            expected: model.n_features(),
            actual: x.width,
        });
    }
    if let Some(lb) = model.lookback() {
        if x.steps != lb {
            return Err(Error::Shape {
                what: "lookback",
                expected: lb,
                actual: x.steps,
            });
        }
    }
    if feature_names.len() != x.width {
        return Err(Error::Shape {
            what: "feature names",
            expected: x.width,
            actual: feature_names.len(),
        });
    }
    let base = match baseline {
        Baseline::ScaledZero => Tensor3::zeros(1, x.steps, x.width),
        Baseline::Window(b) => {
            if b.shape() != x.shape() {
                return Err(Error::Shape {
                    what: "baseline size",
                    expected: x.data.len(),
                    actual: b.data.len(),
                });
            }
            b.clone()
        }
    };

    let len = x.data.len();
    let delta: Vec<f64> = x.data.iter().zip(&base.data).map(|(a, b)| a - b).collect();
    let mut grad_sum = vec![0.0; len];
    let mut k = 1;
    while k <= steps {
        let end = (k + PATH_CHUNK - 1).min(steps);
        let mut points = Tensor3::zeros(end - k + 1, x.steps, x.width);
        for (j, kk) in (k..=end).enumerate() {
            let alpha = kk as f64 / steps as f64;
            for (p, (b, d)) in points.sample_mut(j).iter_mut().zip(base.data.iter().zip(&delta)) {
                *p = b + alpha * d;
            }
        }
        let grads = model.input_gradients(&points)?;
        for j in 0..points.batch {
            for (s, g) in grad_sum.iter_mut().zip(grads.sample(j)) {
                *s += g;
            }
        }
        k = end + 1;
    }

    let ig: Vec<f64> = delta
        .iter()
        .zip(&grad_sum)
        .map(|(d, g)| d * (g / steps as f64))
        .collect();
    let matrix: Vec<Vec<f64>> = ig.chunks(x.width).map(|r| r.to_vec()).collect();
    let mut aggregate = vec![0.0; x.width];
    for row in &matrix {
        for (a, v) in aggregate.iter_mut().zip(row) {
            *a += v;
        }
    }

    let f_x = model.outputs(x)?[0];
    let f_baseline = model.outputs(&base)?[0];
    let diff = f_x - f_baseline;
    let total: f64 = aggregate.iter().sum();
    let completeness_gap = total - diff;
    let relative_gap = (diff != 0.0).then(|| completeness_gap.abs() / diff.abs());
    Ok(AttributionResult {
        matrix,
        aggregate,
        feature_names: feature_names.to_vec(),
        baseline: baseline.descriptor(),
        steps,
        scheme: "right_riemann",
        f_x,
        f_baseline,
        completeness_gap,
        relative_gap,
    })
}

/// [`integrated_gradients`] for a checkpoint with its own manifest.
pub fn attribute(checkpoint: &Checkpoint, x: &Tensor3, baseline: &Baseline, steps: usize) -> Result<AttributionResult> {
    integrated_gradients(checkpoint, &checkpoint.manifest, x, baseline, steps)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureImportance {
    pub feature: String,
    /// Position in the manifest.
    pub index: usize,
    pub mean_abs_attribution: f64,
}

/// Features ranked by mean `|aggregate|` across `results`, descending;
/// ties keep manifest order.
pub fn aggregate_attribution(results: &[AttributionResult]) -> Result<Vec<FeatureImportance>> {
    let first = results.first().ok_or(Error::Empty("attribution results"))?;
    let names = &first.feature_names;
    for r in &results[1..] {
        for index in 0..names.len().max(r.feature_names.len()) {
            let expected = names.get(index);
            let found = r.feature_names.get(index);
            if expected != found {
                return Err(Error::ColumnMismatch {
                    index,
                    expected: expected.cloned().unwrap_or_default(),
                    found: found.cloned().unwrap_or_default(),
                });
            }
        }
    }
    let n = results.len() as f64;
    let mut ranking: Vec<FeatureImportance> = names
        .iter()
        .enumerate()
        .map(|(index, feature)| FeatureImportance {
            feature: feature.clone(),
            index,
            mean_abs_attribution: results.iter().map(|r| r.aggregate[index].abs()).sum::<f64>() / n,
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_abs_attribution.total_cmp(&a.mean_abs_attribution));
    Ok(ranking)
}
