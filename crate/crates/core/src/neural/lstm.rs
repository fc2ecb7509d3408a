//! Single LSTM layer, forward and backward through time.
//!
//! Gate blocks are stacked in the order `[input, forget, candidate, output]`
//! along the `4 * hidden` axis of `w`, `u` and `b`:
//!
//! ```text
//! z = W x_t + U h_{t-1} + b
//! i = sigmoid(z_i)  f = sigmoid(z_f)  g = tanh(z_g)  o = sigmoid(z_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! Initial hidden and cell states are zero.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor3;
use super::{axpy, dot, sigmoid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H x input`, row-major.
    pub w: Vec<f64>,
    /// `4H x H`, row-major.
    pub u: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = 4 * hidden_size;
        LstmLayerParams {
            input_size,
            hidden_size,
            w: vec![0.0; g * input_size],
            u: vec![0.0; g * hidden_size],
            b: vec![0.0; g],
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let g = 4 * self.hidden_size;
        let checks = [
            ("lstm w", g * self.input_size, self.w.len()),
            ("lstm u", g * self.hidden_size, self.u.len()),
            ("lstm b", g, self.b.len()),
        ];
        for (what, expected, actual) in checks {
            if expected != actual {
                return Err(Error::Shape {
                    what,
                    expected,
                    actual,
                });
            }
        }
        if self.w.iter().chain(&self.u).chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter",
                block: name.into(),
            });
        }
        Ok(())
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Tensor3,
    /// Activated gates per `(b, t)`: `[i, f, g, o]`, each `H` wide.
    pub gates: Vec<f64>,
    /// Cell state per `(b, t)`.
    pub c: Vec<f64>,
    /// `tanh(c)` per `(b, t)`.
    pub tanh_c: Vec<f64>,
    /// Hidden state per `(b, t)`; the layer output.
    pub h: Tensor3,
}

pub fn lstm_forward(p: &LstmLayerParams, x: &Tensor3) -> Result<(Tensor3, LstmCache)> {
    if x.width != p.input_size {
        return Err(Error::Shape {
            what: "lstm input width",
            expected: p.input_size,
            actual: x.width,
        });
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "input",
            block: "lstm".into(),
        });
    }
    let (batch, steps) = (x.batch, x.steps);
    let hs = p.hidden_size;
    let g4 = 4 * hs;
    let mut gates = vec![0.0; batch * steps * g4];
    let mut c_all = vec![0.0; batch * steps * hs];
    let mut tanh_all = vec![0.0; batch * steps * hs];
    let mut h_out = Tensor3::zeros(batch, steps, hs);
    let zeros = vec![0.0; hs];
    let mut z = vec![0.0; g4];
    let mut c_new = vec![0.0; hs];

    for bi in 0..batch {
        for t in 0..steps {
            let xt = x.row(bi, t);
            let prev = bi * steps + t;
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (
                    h_out.row(bi, t - 1),
                    &c_all[(prev - 1) * hs..prev * hs],
                )
            };
            for r in 0..g4 {
                z[r] = p.b[r]
                    + dot(&p.w[r * p.input_size..(r + 1) * p.input_size], xt)
                    + dot(&p.u[r * hs..(r + 1) * hs], h_prev);
            }
            let gt = &mut gates[prev * g4..(prev + 1) * g4];
            for k in 0..hs {
                gt[k] = sigmoid(z[k]);
                gt[hs + k] = sigmoid(z[hs + k]);
                gt[2 * hs + k] = libm::tanh(z[2 * hs + k]);
                gt[3 * hs + k] = sigmoid(z[3 * hs + k]);
            }
            for k in 0..hs {
                c_new[k] = gt[hs + k] * c_prev[k] + gt[k] * gt[2 * hs + k];
            }
            let tc = &mut tanh_all[prev * hs..(prev + 1) * hs];
            let h_row = h_out.row_mut(bi, t);
            for k in 0..hs {
                tc[k] = libm::tanh(c_new[k]);
                h_row[k] = gt[3 * hs + k] * tc[k];
            }
            c_all[prev * hs..(prev + 1) * hs].copy_from_slice(&c_new);
        }
    }

    let cache = LstmCache {
        x: x.clone(),
        gates,
        c: c_all,
        tanh_c: tanh_all,
        h: h_out.clone(),
    };
    Ok((h_out, cache))
}

/// Exact gradients of the forward pass given `dL/dh_t` for every step.
/// Returns parameter gradients (same layout as the parameters) and `dL/dx`.
pub fn lstm_backward(
    p: &LstmLayerParams,
    cache: &LstmCache,
    grad_h_seq: &Tensor3,
) -> Result<(LstmLayerParams, Tensor3)> {
    let (batch, steps, _) = cache.x.shape();
    let hs = p.hidden_size;
    let g4 = 4 * hs;
    if grad_h_seq.shape() != (batch, steps, hs) {
        return Err(Error::Shape {
            what: "lstm upstream gradient",
            expected: batch * steps * hs,
            actual: grad_h_seq.data.len(),
        });
    }
    let n_in = p.input_size;
    let mut grads = LstmLayerParams::zeros(n_in, hs);
    let mut grad_x = Tensor3::zeros(batch, steps, n_in);
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut dh = vec![0.0; hs];
    let mut dz = vec![0.0; g4];
    let zeros = vec![0.0; hs];

    for bi in 0..batch {
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        dc_next.iter_mut().for_each(|v| *v = 0.0);
        for t in (0..steps).rev() {
            let idx = bi * steps + t;
            let gt = &cache.gates[idx * g4..(idx + 1) * g4];
            let tc = &cache.tanh_c[idx * hs..(idx + 1) * hs];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (
                    cache.h.row(bi, t - 1),
                    &cache.c[(idx - 1) * hs..idx * hs],
                )
            };
            let up = grad_h_seq.row(bi, t);
            for k in 0..hs {
                dh[k] = up[k] + dh_next[k];
            }
            for k in 0..hs {
                let (i, f, g, o) = (gt[k], gt[hs + k], gt[2 * hs + k], gt[3 * hs + k]);
                let dc = dh[k] * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
                let d_o = dh[k] * tc[k];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev[k];
                dc_next[k] = dc * f;
                dz[k] = d_i * i * (1.0 - i);
                dz[hs + k] = d_f * f * (1.0 - f);
                dz[2 * hs + k] = d_g * (1.0 - g * g);
                dz[3 * hs + k] = d_o * o * (1.0 - o);
            }
            let xt = cache.x.row(bi, t);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let gx = grad_x.row_mut(bi, t);
            for r in 0..g4 {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                grads.b[r] += d;
                axpy(d, xt, &mut grads.w[r * n_in..(r + 1) * n_in]);
                axpy(d, h_prev, &mut grads.u[r * hs..(r + 1) * hs]);
                axpy(d, &p.w[r * n_in..(r + 1) * n_in], gx);
                axpy(d, &p.u[r * hs..(r + 1) * hs], &mut dh_next);
            }
        }
    }
    Ok((grads, grad_x))
}
