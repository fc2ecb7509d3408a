use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            what: "mse target length",
            expected: pred.len(),
            actual: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("prediction vector"));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}
