//! Slow reference implementations used to check the optimized code.
//! Shared with the acceptance suite of the `tsf` crate.
#![allow(dead_code)]

use tsf_core::neural::{LstmLayerParams, Tensor3};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM layer written element by element with no shared helpers.
/// Returns `h` for every `(batch, step)` in the same layout as the layer.
pub fn lstm_scalar(p: &LstmLayerParams, x: &Tensor3) -> Vec<f64> {
    let n_in = p.input_size;
    let hs = p.hidden_size;
    let mut out = vec![0.0; x.batch * x.steps * hs];
    for b in 0..x.batch {
        let mut h = vec![0.0; hs];
        let mut c = vec![0.0; hs];
        for t in 0..x.steps {
            let mut h_next = vec![0.0; hs];
            for k in 0..hs {
                let mut pre = [0.0f64; 4];
                for (gate, z) in pre.iter_mut().enumerate() {
                    let row = gate * hs + k;
                    let mut acc = p.b[row];
                    for j in 0..n_in {
                        acc += p.w[row * n_in + j] * x.get(b, t, j);
                    }
                    for j in 0..hs {
                        acc += p.u[row * hs + j] * h[j];
                    }
                    *z = acc;
                }
                let i = sigmoid(pre[0]);
                let f = sigmoid(pre[1]);
                let g = pre[2].tanh();
                let o = sigmoid(pre[3]);
                c[k] = f * c[k] + i * g;
                h_next[k] = o * c[k].tanh();
            }
            h = h_next;
            out[(b * x.steps + t) * hs..(b * x.steps + t + 1) * hs].copy_from_slice(&h);
        }
    }
    out
}

/// Trailing mean recomputed from scratch at every position.
pub fn sma_brute(x: &[f64], w: usize) -> Vec<f64> {
    (0..x.len())
        .map(|t| {
            if t + 1 < w {
                f64::NAN
            } else {
                x[t + 1 - w..=t].iter().sum::<f64>() / w as f64
            }
        })
        .collect()
}

/// EMA through its closed form
/// `e_t = (1-a)^t x_0 + sum_{k=1..t} a (1-a)^(t-k) x_k`,
/// masked before `min_periods` observations.
pub fn ema_closed_form(x: &[f64], span: usize, min_periods: usize) -> Vec<f64> {
    let a = 2.0 / (span as f64 + 1.0);
    (0..x.len())
        .map(|t| {
            if t + 1 < min_periods {
                return f64::NAN;
            }
            let mut e = (1.0 - a).powi(t as i32) * x[0];
            for k in 1..=t {
                e += a * (1.0 - a).powi((t - k) as i32) * x[k];
            }
            e
        })
        .collect()
}

/// Line and signal, each EMA masked until it has seen `span` values.
pub fn macd_brute(x: &[f64], fast: usize, slow: usize, signal: usize) -> (Vec<f64>, Vec<f64>) {
    let f = ema_closed_form(x, fast, fast);
    let s = ema_closed_form(x, slow, slow);
    let line: Vec<f64> = f.iter().zip(&s).map(|(a, b)| a - b).collect();
    let start = slow - 1;
    let sig_tail = ema_closed_form(&line[start..], signal, signal);
    let mut sig = vec![f64::NAN; start];
    sig.extend(sig_tail);
    (line, sig)
}

/// Bands from a two-pass population standard deviation per window.
pub fn bollinger_brute(x: &[f64], w: usize, k: f64) -> (Vec<f64>, Vec<f64>) {
    let mut up = vec![f64::NAN; x.len()];
    let mut lo = vec![f64::NAN; x.len()];
    for t in w - 1..x.len() {
        let win = &x[t + 1 - w..=t];
        let m = win.iter().sum::<f64>() / w as f64;
        let sd = (win.iter().map(|v| (v - m).powi(2)).sum::<f64>() / w as f64).sqrt();
        up[t] = m + k * sd;
        lo[t] = m - k * sd;
    }
    (up, lo)
}

/// Largest absolute difference; NaN positions must coincide.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst: f64 = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert_eq!(x.is_nan(), y.is_nan(), "missing mismatch at {i}: {x} vs {y}");
        if !x.is_nan() {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Coefficient of determination from its textbook definition.
pub fn r2_direct(a: &[f64], p: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let ss_tot: f64 = a.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = a.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
