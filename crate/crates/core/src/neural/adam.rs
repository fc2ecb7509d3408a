use alloc::vec;
use alloc::vec::Vec;

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for every parameter block, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters>(config: AdamConfig, params: &P) -> Self {
        let sizes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
        AdamState {
            config,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update of a single block. `t` is the step
/// number after incrementing (so `t >= 1`).
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for k in 0..theta.len() {
        let g = grad[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[k] / bc1;
        let v_hat = v[k] / bc2;
        theta[k] -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
    }
}

/// Applies one Adam step to every block. Nothing is modified if any
/// gradient is non-finite or a shape disagrees.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let gblocks = grads.blocks();
    {
        let pblocks = params.blocks();
        if pblocks.len() != gblocks.len() || state.m.len() != pblocks.len() {
            return Err(Error::Shape {
                what: "parameter block count",
                expected: pblocks.len(),
                actual: gblocks.len(),
            });
        }
        for (k, ((_, p), (name, g))) in pblocks.iter().zip(&gblocks).enumerate() {
            if p.len() != g.len() || state.m[k].len() != p.len() {
                return Err(Error::Shape {
                    what: "parameter block length",
                    expected: p.len(),
                    actual: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "gradient",
                    block: (*name).into(),
                });
            }
        }
    }
    state.t += 1;
    let t = state.t;
    let cfg = state.config;
    for (k, (_, theta)) in params.blocks_mut().into_iter().enumerate() {
        adam_update(theta, gblocks[k].1, &mut state.m[k], &mut state.v[k], t, &cfg);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl Parameters for Scalar {
        fn blocks(&self) -> Vec<(&'static str, &[f64])> {
            vec![("theta", &self.0)]
        }
        fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
            vec![("theta", &mut self.0)]
        }
    }

    /// Scalar reference recurrence written out step by step.
    fn reference(theta0: f64, grads: &[f64], cfg: &AdamConfig) -> f64 {
        let (mut theta, mut m, mut v) = (theta0, 0.0f64, 0.0f64);
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let mh = m / (1.0 - cfg.beta1.powi(t));
            let vh = v / (1.0 - cfg.beta2.powi(t));
            theta -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        theta
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Scalar(vec![0.5, -0.25]);
        let g = Scalar(vec![0.0, 0.0]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.0, [0.5, -0.25]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Scalar(vec![0.0]);
        let g = Scalar(vec![1.0]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        adam_step(&mut p, &g, &mut s).unwrap();
        // m_hat = v_hat = 1 at t = 1
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() <= 1e-15, "{}", p.0[0]);
        assert!((p.0[0] + 0.000999999990).abs() < 1e-12);
    }

    #[test]
    fn two_steps_match_reference() {
        let cfg = AdamConfig::default();
        let mut p = Scalar(vec![0.0]);
        let g = Scalar(vec![1.0]);
        let mut s = AdamState::new(cfg, &p);
        adam_step(&mut p, &g, &mut s).unwrap();
        adam_step(&mut p, &g, &mut s).unwrap();
        assert!((p.0[0] - reference(0.0, &[1.0, 1.0], &cfg)).abs() <= 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = Scalar(vec![0.0]);
        let g = Scalar(vec![f64::NAN]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        assert_eq!(
            adam_step(&mut p, &g, &mut s),
            Err(Error::NonFinite {
                what: "gradient",
                block: "theta".into()
            })
        );
        assert_eq!(s.t, 0);
        assert_eq!(p.0, [0.0]);
    }

    #[test]
    fn second_moment_non_negative() {
        let mut p = Scalar(vec![0.0; 3]);
        let g = Scalar(vec![-3.0, 0.5, 1e-9]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s).unwrap();
        }
        assert!(s.v[0].iter().all(|v| *v >= 0.0));
    }
}
