//! Central finite-difference verification of analytic gradients.

use alloc::vec::Vec;

use super::loss::mse_loss;
use super::model::{model_backward, model_forward, ForwardMode, ModelParams};
use super::tensor::Tensor3;
use super::Parameters;
use crate::error::Result;

/// Gradients smaller than this in magnitude are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per block, in block order.
    pub per_block: Vec<(&'static str, f64)>,
    pub n_checked: usize,
}

impl GradCheckReport {
    pub fn worst_block(&self) -> &'static str {
        self.per_block
            .iter()
            .fold(("", -1.0), |acc, &(n, e)| if e > acc.1 { (n, e) } else { acc })
            .0
    }
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `loss` around
/// `params`, perturbing every scalar by `+-step`.
pub fn check_gradients<P, F>(params: &P, analytic: &P, step: f64, mut loss: F) -> GradCheckReport
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let mut work = params.clone();
    let analytic_blocks: Vec<Vec<f64>> = analytic.blocks().iter().map(|(_, b)| b.to_vec()).collect();
    let names: Vec<&'static str> = params.blocks().iter().map(|(n, _)| *n).collect();
    let mut per_block = Vec::with_capacity(names.len());
    let mut n_checked = 0;
    for (k, name) in names.iter().enumerate() {
        let len = analytic_blocks[k].len();
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let orig = work.blocks()[k].1[i];
            work.blocks_mut()[k].1[i] = orig + step;
            let up = loss(&work);
            work.blocks_mut()[k].1[i] = orig - step;
            let down = loss(&work);
            work.blocks_mut()[k].1[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(analytic_blocks[k][i], numeric));
            n_checked += 1;
        }
        per_block.push((*name, worst));
    }
    GradCheckReport {
        max_rel_error: per_block.iter().fold(0.0, |m, (_, e)| m.max(*e)),
        per_block,
        n_checked,
    }
}

/// Checks the backward pass of `MSE(model(x), y)` for every parameter.
/// In training mode the dropout mask is fixed by `mode`'s seed, so both
/// finite-difference evaluations see the same mask.
pub fn gradient_check(params: &ModelParams, x: &Tensor3, y: &[f64], mode: ForwardMode, step: f64) -> Result<GradCheckReport> {
    params.validate()?;
    let (pred, cache) = model_forward(params, x, mode)?;
    let (_, grad_pred) = mse_loss(&pred, y)?;
    let (analytic, _) = model_backward(params, &cache, &grad_pred)?;
    // Shapes were validated above, so the perturbed evaluations cannot fail.
    let report = check_gradients(params, &analytic, step, |p| {
        let (pred, _) = model_forward(p, x, mode).expect("validated shapes");
        mse_loss(&pred, y).expect("validated shapes").0
    });
    Ok(report)
}
