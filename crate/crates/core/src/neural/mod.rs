//! Dense f64 math for the forecasting network: a two-layer LSTM with a
//! linear head, inverted dropout, MSE, Adam, and finite-difference gradient
//! checking. Everything is hand-differentiated; there is no autograd.

pub mod adam;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dropout::dropout;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::mse_loss;
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmLayerParams};
pub use model::{
    init_params, init_params_for, model_backward, model_forward, Architecture, DenseParams,
    ForwardMode, ModelCache, ModelParams,
};
pub use tensor::Tensor3;

use alloc::vec::Vec;

/// Named flat parameter blocks, visited in a fixed order.
pub trait Parameters {
    fn blocks(&self) -> Vec<(&'static str, &[f64])>;
    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    fn n_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
