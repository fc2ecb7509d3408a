//! The forecasting network:
//! LSTM (returns sequences) -> dropout -> LSTM (last state) -> dropout -> dense(1).

use alloc::vec;
use alloc::vec::Vec;

use super::dropout::dropout;
use super::lstm::{lstm_backward, lstm_forward, LstmCache, LstmLayerParams};
use super::tensor::Tensor3;
use super::{dot, Parameters};
use crate::error::{Error, Result};
use crate::rng::{derive, Rng, RngSeed};

/// Shape of the network. Lookback is not part of the weights and lives in
/// the checkpoint descriptor instead.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    pub input_size: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout_rate: f64,
}

impl Architecture {
    pub fn new(input_size: usize) -> Self {
        Architecture {
            input_size,
            hidden1: 64,
            hidden2: 64,
            dropout_rate: 0.2,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden1 = hidden;
        self.hidden2 = hidden;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size < 1 {
            return Err(Error::invalid("input_size", "must be >= 1"));
        }
        if self.hidden1 < 1 || self.hidden2 < 1 {
            return Err(Error::invalid("hidden", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Linear head mapping the last hidden state to one output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl DenseParams {
    pub fn zeros(input: usize) -> Self {
        DenseParams {
            w: vec![0.0; input],
            b: 0.0,
        }
    }

    /// One output per row of `h` (`batch x w.len()`, row-major).
    pub fn forward(&self, h: &[f64]) -> Vec<f64> {
        h.chunks_exact(self.w.len())
            .map(|row| dot(&self.w, row) + self.b)
            .collect()
    }

    /// Gradients for the head and for its input.
    pub fn backward(&self, h: &[f64], grad_out: &[f64]) -> (DenseParams, Vec<f64>) {
        let n = self.w.len();
        let mut g = DenseParams::zeros(n);
        let mut grad_h = vec![0.0; h.len()];
        for (bi, &d) in grad_out.iter().enumerate() {
            let row = &h[bi * n..(bi + 1) * n];
            g.b += d;
            for k in 0..n {
                g.w[k] += d * row[k];
                grad_h[bi * n + k] = d * self.w[k];
            }
        }
        (g, grad_h)
    }
}

impl Parameters for DenseParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![("head.w", &self.w), ("head.b", core::slice::from_ref(&self.b))]
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("head.w", &mut self.w), ("head.b", core::slice::from_mut(&mut self.b))]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub head: DenseParams,
    pub dropout_rate: f64,
}

/// Block names in [`Parameters`] order.
pub const BLOCK_NAMES: [&str; 8] = [
    "layer1.w", "layer1.u", "layer1.b", "layer2.w", "layer2.u", "layer2.b", "head.w", "head.b",
];

impl Parameters for ModelParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            (BLOCK_NAMES[0], &self.layer1.w),
            (BLOCK_NAMES[1], &self.layer1.u),
            (BLOCK_NAMES[2], &self.layer1.b),
            (BLOCK_NAMES[3], &self.layer2.w),
            (BLOCK_NAMES[4], &self.layer2.u),
            (BLOCK_NAMES[5], &self.layer2.b),
            (BLOCK_NAMES[6], &self.head.w),
            (BLOCK_NAMES[7], core::slice::from_ref(&self.head.b)),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            (BLOCK_NAMES[0], &mut self.layer1.w),
            (BLOCK_NAMES[1], &mut self.layer1.u),
            (BLOCK_NAMES[2], &mut self.layer1.b),
            (BLOCK_NAMES[3], &mut self.layer2.w),
            (BLOCK_NAMES[4], &mut self.layer2.u),
            (BLOCK_NAMES[5], &mut self.layer2.b),
            (BLOCK_NAMES[6], &mut self.head.w),
            (BLOCK_NAMES[7], core::slice::from_mut(&mut self.head.b)),
        ]
    }
}

impl ModelParams {
    pub fn zeros(arch: &Architecture) -> Self {
        ModelParams {
            layer1: LstmLayerParams::zeros(arch.input_size, arch.hidden1),
            layer2: LstmLayerParams::zeros(arch.hidden1, arch.hidden2),
            head: DenseParams::zeros(arch.hidden2),
            dropout_rate: arch.dropout_rate,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_size: self.layer1.input_size,
            hidden1: self.layer1.hidden_size,
            hidden2: self.layer2.hidden_size,
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture().validate()?;
        self.layer1.validate("layer1")?;
        self.layer2.validate("layer2")?;
        if self.layer2.input_size != self.layer1.hidden_size {
            return Err(Error::Shape {
                what: "layer2 input size",
                expected: self.layer1.hidden_size,
                actual: self.layer2.input_size,
            });
        }
        if self.head.w.len() != self.layer2.hidden_size {
            return Err(Error::Shape {
                what: "head width",
                expected: self.layer2.hidden_size,
                actual: self.head.w.len(),
            });
        }
        if self.head.w.iter().any(|v| !v.is_finite()) || !self.head.b.is_finite() {
            return Err(Error::NonFinite {
                what: "parameter",
                block: "head".into(),
            });
        }
        Ok(())
    }

    /// Every parameter scaled by zero, keeping shapes.
    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(&self.architecture())
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &ModelParams) {
        let theirs = other.blocks();
        for (k, (_, mine)) in self.blocks_mut().into_iter().enumerate() {
            for (a, b) in mine.iter_mut().zip(theirs[k].1) {
                *a += b;
            }
        }
    }

    /// Element-wise `self *= s`.
    pub fn scale(&mut self, s: f64) {
        for (_, block) in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        let sq: f64 = self
            .blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .map(|v| v * v)
            .sum();
        libm::sqrt(sq)
    }
}

fn glorot(rng: &mut Rng, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    for v in out {
        *v = rng.uniform(-limit, limit);
    }
}

fn init_lstm(rng: &mut Rng, input: usize, hidden: usize) -> LstmLayerParams {
    let mut p = LstmLayerParams::zeros(input, hidden);
    glorot(rng, &mut p.w, input, 4 * hidden);
    glorot(rng, &mut p.u, hidden, 4 * hidden);
    p.b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
    p
}

/// Default-shaped network (two 64-unit layers, dropout 0.2).
pub fn init_params(input_size: usize, seed: RngSeed) -> Result<ModelParams> {
    init_params_for(&Architecture::new(input_size), seed)
}

/// Glorot-uniform weights, zero biases except the forget gate at 1.0.
pub fn init_params_for(arch: &Architecture, seed: RngSeed) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = Rng::new(derive(seed.0, &[0x1417]));
    let layer1 = init_lstm(&mut rng, arch.input_size, arch.hidden1);
    let layer2 = init_lstm(&mut rng, arch.hidden1, arch.hidden2);
    let mut head = DenseParams::zeros(arch.hidden2);
    glorot(&mut rng, &mut head.w, arch.hidden2, 1);
    Ok(ModelParams {
        layer1,
        layer2,
        head,
        dropout_rate: arch.dropout_rate,
    })
}

/// Whether dropout is active. Training masks are a pure function of the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Inference,
    Training { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    l1: LstmCache,
    mask1: Option<Vec<f64>>,
    l2: LstmCache,
    mask2: Option<Vec<f64>>,
    /// Last hidden state of layer 2 after dropout, `batch x hidden2`.
    head_input: Vec<f64>,
}

pub fn model_forward(params: &ModelParams, x: &Tensor3, mode: ForwardMode) -> Result<(Vec<f64>, ModelCache)> {
    if x.width != params.layer1.input_size {
        return Err(Error::Shape {
            what: "input features",
            expected: params.layer1.input_size,
            actual: x.width,
        });
    }
    if x.steps == 0 {
        return Err(Error::Empty("input sequence"));
    }
    let (training, seed) = match mode {
        ForwardMode::Inference => (false, 0),
        ForwardMode::Training { seed } => (true, seed),
    };
    let rate = params.dropout_rate;

    let (h1, l1) = lstm_forward(&params.layer1, x)?;
    let (d1, mask1) = dropout(&h1.data, rate, training, derive(seed, &[1]))?;
    let h1_dropped = Tensor3::from_vec(h1.batch, h1.steps, h1.width, d1)?;

    let (h2, l2) = lstm_forward(&params.layer2, &h1_dropped)?;
    let hs2 = params.layer2.hidden_size;
    let mut last = Vec::with_capacity(x.batch * hs2);
    for bi in 0..x.batch {
        last.extend_from_slice(h2.row(bi, x.steps - 1));
    }
    let (head_input, mask2) = dropout(&last, rate, training, derive(seed, &[2]))?;
    let pred = params.head.forward(&head_input);

    Ok((
        pred,
        ModelCache {
            l1,
            mask1,
            l2,
            mask2,
            head_input,
        },
    ))
}

/// Gradients of a scalar loss given `dL/dpred`: parameter gradients and
/// the gradient with respect to the input tensor.
pub fn model_backward(params: &ModelParams, cache: &ModelCache, grad_pred: &[f64]) -> Result<(ModelParams, Tensor3)> {
    let (batch, steps, _) = cache.l1.x.shape();
    if grad_pred.len() != batch {
        return Err(Error::Shape {
            what: "prediction gradient",
            expected: batch,
            actual: grad_pred.len(),
        });
    }
    let (head_grad, mut grad_last) = params.head.backward(&cache.head_input, grad_pred);
    if let Some(mask) = &cache.mask2 {
        grad_last.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
    }
    let hs2 = params.layer2.hidden_size;
    let mut grad_h2 = Tensor3::zeros(batch, steps, hs2);
    for bi in 0..batch {
        grad_h2
            .row_mut(bi, steps - 1)
            .copy_from_slice(&grad_last[bi * hs2..(bi + 1) * hs2]);
    }
    let (l2_grad, mut grad_h1) = lstm_backward(&params.layer2, &cache.l2, &grad_h2)?;
    if let Some(mask) = &cache.mask1 {
        grad_h1.data.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
    }
    let (l1_grad, grad_x) = lstm_backward(&params.layer1, &cache.l1, &grad_h1)?;
    Ok((
        ModelParams {
            layer1: l1_grad,
            layer2: l2_grad,
            head: head_grad,
            dropout_rate: params.dropout_rate,
        },
        grad_x,
    ))
}

/// Inference-mode predictions only.
pub fn predict(params: &ModelParams, x: &Tensor3) -> Result<Vec<f64>> {
    model_forward(params, x, ForwardMode::Inference).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelParams {
        let arch = Architecture {
            input_size: 3,
            hidden1: 4,
            hidden2: 5,
            dropout_rate: 0.2,
        };
        init_params_for(&arch, RngSeed(3)).unwrap()
    }

    fn input(batch: usize, seed: u64) -> Tensor3 {
        let mut rng = Rng::new(seed);
        let data = (0..batch * 6 * 3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Tensor3::from_vec(batch, 6, 3, data).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(7, RngSeed(99)).unwrap();
        let b = init_params(7, RngSeed(99)).unwrap();
        for ((_, x), (_, y)) in a.blocks().iter().zip(b.blocks().iter()) {
            assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert_ne!(a, init_params(7, RngSeed(100)).unwrap());
    }

    #[test]
    fn init_shapes_bias_and_bounds() {
        let p = init_params(7, RngSeed(1)).unwrap();
        p.validate().unwrap();
        assert_eq!(p.layer1.w.len(), 256 * 7);
        assert_eq!(p.layer2.u.len(), 256 * 64);
        assert!(p.layer1.b[64..128].iter().all(|&v| v == 1.0));
        assert!(p.layer2.b[64..128].iter().all(|&v| v == 1.0));
        assert!(p.layer1.b[..64].iter().chain(&p.layer1.b[128..]).all(|&v| v == 0.0));
        let lim1 = (6.0f64 / (7.0 + 256.0)).sqrt();
        assert!(p.layer1.w.iter().all(|v| v.abs() <= lim1));
        let lim2 = (6.0f64 / (64.0 + 256.0)).sqrt();
        assert!(p.layer2.u.iter().all(|v| v.abs() <= lim2));
        assert_eq!(p.head.b, 0.0);
        assert!(init_params(0, RngSeed(1)).is_err());
    }

    #[test]
    fn zero_params_predict_zero() {
        let p = ModelParams::zeros(&Architecture::new(3).with_hidden(4));
        let (pred, _) = model_forward(&p, &input(4, 1), ForwardMode::Training { seed: 3 }).unwrap();
        assert!(pred.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_samples_identical_predictions() {
        let p = tiny();
        let one = input(1, 5);
        let batch = one.gather_batch(&[0, 0, 0]);
        let pred = predict(&p, &batch).unwrap();
        assert_eq!(pred[0].to_bits(), pred[1].to_bits());
        assert_eq!(pred[0].to_bits(), pred[2].to_bits());
        assert_eq!(pred[0].to_bits(), predict(&p, &one).unwrap()[0].to_bits());
    }

    #[test]
    fn batch_permutation_permutes_predictions() {
        let p = tiny();
        let x = input(4, 8);
        let perm = [2, 0, 3, 1];
        let a = predict(&p, &x).unwrap();
        let b = predict(&p, &x.gather_batch(&perm)).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(b[k].to_bits(), a[i].to_bits());
        }
    }

    #[test]
    fn inference_is_repeatable_and_mask_free() {
        let p = tiny();
        let x = input(3, 2);
        assert_eq!(predict(&p, &x).unwrap(), predict(&p, &x).unwrap());
        let (_, cache) = model_forward(&p, &x, ForwardMode::Inference).unwrap();
        assert!(cache.mask1.is_none() && cache.mask2.is_none());
    }

    #[test]
    fn training_masks_follow_seed() {
        let p = tiny();
        let x = input(3, 2);
        let a = model_forward(&p, &x, ForwardMode::Training { seed: 1 }).unwrap().0;
        let b = model_forward(&p, &x, ForwardMode::Training { seed: 1 }).unwrap().0;
        let c = model_forward(&p, &x, ForwardMode::Training { seed: 2 }).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = tiny();
        let x = Tensor3::zeros(1, 6, 4);
        assert!(matches!(
            model_forward(&p, &x, ForwardMode::Inference),
            Err(Error::Shape { .. })
        ));
    }
}
