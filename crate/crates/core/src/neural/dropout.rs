use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, seed: u64) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - rate);
    let mut rng = Rng::new(seed);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep_scale })
        .collect()
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid("dropout rate", "must lie in [0, 1)"));
    }
    Ok(())
}

/// Applies dropout. With `training == false` the input is returned
/// unchanged and no mask is drawn. The mask is a pure function of `seed`.
pub fn dropout(x: &[f64], rate: f64, training: bool, seed: u64) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    check_rate(rate)?;
    if !training {
        return Ok((x.to_vec(), None));
    }
    let mask = dropout_mask(x.len(), rate, seed);
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((out, Some(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn inference_is_identity() {
        let x = [1.5, -2.0, 0.25];
        let (y, mask) = dropout(&x, 0.2, false, 9).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn zero_rate_is_identity_when_training() {
        let x = [1.5, -2.0, 0.25, 1e-300];
        let (y, _) = dropout(&x, 0.0, true, 9).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(dropout(&[1.0], 1.0, true, 0).is_err());
        assert!(dropout(&[1.0], -0.1, false, 0).is_err());
    }

    #[test]
    fn mask_is_seeded() {
        assert_eq!(dropout_mask(64, 0.2, 5), dropout_mask(64, 0.2, 5));
        assert_ne!(dropout_mask(64, 0.2, 5), dropout_mask(64, 0.2, 6));
    }

    #[test]
    fn expectation_preserved() {
        // 10^5 masked evaluations of a ones tensor
        let ones = vec![1.0; 100_000];
        let (y, _) = dropout(&ones, 0.2, true, 42).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let dropped = y.iter().filter(|v| **v == 0.0).count() as f64 / y.len() as f64;
        assert!((dropped - 0.2).abs() < 0.01);
    }
}
