//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseNet, NetGrads};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates and the number of steps taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn for_net(net: &DenseNet) -> Self {
        Self::new(net.param_count())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

fn update_slice(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], cfg: &AdamConfig, bc1: f64, bc2: f64) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One Adam step on a flat parameter vector.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::DimMismatch { expected: params.len(), got: grads.len().min(state.len()) });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    update_slice(params, grads, &mut state.m, &mut state.v, cfg, bc1, bc2);
    Ok(())
}

/// One Adam step over all parameters of a network.
pub fn adam_step_net(net: &mut DenseNet, grads: &NetGrads, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.len() != net.param_count() || grads.layers.len() != net.layers().len() {
        return Err(Error::DimMismatch { expected: net.param_count(), got: state.len() });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut off = 0;
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        if layer.weight.shape() != g.weight.shape() || layer.bias.len() != g.bias.len() {
            return Err(Error::Shape("gradient layout does not match network".into()));
        }
        let n = layer.weight.data().len();
        let (m, v) = (&mut state.m[off..off + n], &mut state.v[off..off + n]);
        update_slice(layer.weight.data_mut(), g.weight.data(), m, v, cfg, bc1, bc2);
        off += n;
        let n = layer.bias.len();
        let (m, v) = (&mut state.m[off..off + n], &mut state.v[off..off + n]);
        update_slice(&mut layer.bias, &g.bias, m, v, cfg, bc1, bc2);
        off += n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![0.5, -1.25, 3.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps).
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        adam_step(&mut p, &[1.0], &mut st, &cfg).unwrap();
        let expected = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{}", p[0]);
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn identical_params_get_identical_updates() {
        let mut p = vec![0.3, 0.3];
        let mut st = AdamState::new(2);
        for g in [0.7, -0.2, 1.4] {
            adam_step(&mut p, &[g, g], &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p[0].to_bits(), p[1].to_bits());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(2);
        assert!(adam_step(&mut p, &[1.0], &mut st, &AdamConfig::default()).is_err());
    }

    #[test]
    fn finite_gradients_keep_params_finite() {
        let mut p = vec![1e300, -1e300, 0.0];
        let mut st = AdamState::new(3);
        for _ in 0..10 {
            adam_step(&mut p, &[1e300, -1e-300, 5.0], &mut st, &AdamConfig::default()).unwrap();
        }
        assert!(p.iter().all(|v| v.is_finite()));
    }
}
