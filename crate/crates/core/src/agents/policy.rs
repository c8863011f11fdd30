//! Policy networks and their action heads.
//!
//! Both policy kinds expose a pre-squash mean. The deterministic action is
//! always `center + half_range · tanh(mean)`; regularizers and evaluation use
//! that path.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, GradTape, OutputActivation};
use crate::smoothness::{ActionBounds, ActionVector};
use crate::tensor::Tensor2;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Outputs mean and log-std of a tanh-squashed Gaussian.
    Gaussian,
    /// Outputs the pre-squash action directly.
    Deterministic,
}

/// Mean and clamped log-std split from the final layer.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mean: Tensor2,
    pub log_std: Tensor2,
    /// Whether each log-std entry hit a clamp bound (zero gradient there).
    pub clamped: Vec<bool>,
}

/// Splits `features` (`rows × 2·act_dim`) into mean and clamped log-std.
pub fn gaussian_head(features: &Tensor2, act_dim: usize) -> Result<GaussianHead> {
    if features.cols() != 2 * act_dim {
        return Err(Error::Shape(format!("gaussian head expects {} features, got {}", 2 * act_dim, features.cols())));
    }
    features.check_finite("gaussian head")?;
    let mean = features.cols_range(0, act_dim);
    let raw = features.cols_range(act_dim, act_dim);
    let clamped = raw.data().iter().map(|v| *v < LOG_STD_MIN || *v > LOG_STD_MAX).collect();
    let log_std = raw.map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    Ok(GaussianHead { mean, log_std, clamped })
}

/// Reparameterized sample from a squashed Gaussian.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    /// `tanh(mean + std·ξ)`, before scaling to bounds.
    pub squashed: Tensor2,
    pub actions: Tensor2,
    pub log_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: DenseNet,
    pub kind: PolicyKind,
    pub bounds: ActionBounds,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        kind: PolicyKind,
        bounds: ActionBounds,
        rng: &mut R,
    ) -> Result<Self> {
        let out = match kind {
            PolicyKind::Gaussian => 2 * bounds.dim(),
            PolicyKind::Deterministic => bounds.dim(),
        };
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let net = DenseNet::new(&sizes, Activation::Relu, OutputActivation::Identity, rng)?;
        Ok(Self { net, kind, bounds })
    }

    pub fn act_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Pre-squash means from raw network outputs.
    pub fn mean_of(&self, out: &Tensor2) -> Tensor2 {
        match self.kind {
            PolicyKind::Gaussian => out.cols_range(0, self.act_dim()),
            PolicyKind::Deterministic => out.clone(),
        }
    }

    /// `center + half_range · tanh(mean)` row by row.
    pub fn squash(&self, mean: &Tensor2) -> Tensor2 {
        let mut a = mean.clone();
        for r in 0..a.rows() {
            for (i, v) in a.row_mut(r).iter_mut().enumerate() {
                *v = self.bounds.center(i) + self.bounds.half_range(i) * v.tanh();
            }
        }
        a
    }

    /// Deterministic actions for a batch of states.
    pub fn deterministic_actions(&self, states: &Tensor2) -> Result<Tensor2> {
        let out = self.net.predict(states)?;
        let a = self.squash(&self.mean_of(&out));
        a.check_finite("deterministic action")?;
        Ok(a)
    }

    pub fn deterministic_action(&self, state: &[f64]) -> Result<ActionVector> {
        let s = Tensor2::from_vec(1, state.len(), state.to_vec())?;
        ActionVector::new(self.deterministic_actions(&s)?.into_vec())
    }

    /// Forward pass recording into `tape`, returning raw network outputs.
    pub fn forward(&self, states: &Tensor2, tape: &mut GradTape) -> Result<Tensor2> {
        self.net.forward(states, tape)
    }

    /// Samples `a = squash(mean + std·ξ)` given the Gaussian head and fixed
    /// standard-normal noise `xi`.
    pub fn sample_with_noise(&self, head: &GaussianHead, xi: &Tensor2) -> Result<SquashedSample> {
        let d = self.act_dim();
        if xi.shape() != head.mean.shape() {
            return Err(Error::Shape("noise shape does not match policy mean".into()));
        }
        let rows = head.mean.rows();
        let mut squashed = Tensor2::zeros(rows, d);
        let mut log_prob = vec![0.0; rows];
        for r in 0..rows {
            let mut lp = 0.0;
            for i in 0..d {
                let ls = head.log_std.get(r, i);
                let x = xi.get(r, i);
                let u = head.mean.get(r, i) + ls.exp() * x;
                let t = u.tanh();
                squashed.set(r, i, t);
                // log N(u; m, σ) − log(1 − tanh²u) − log(half_range), the
                // squash correction in its overflow-free form.
                let log_det = 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u));
                lp += -0.5 * x * x - ls - HALF_LOG_TWO_PI - log_det - self.bounds.half_range(i).ln();
            }
            log_prob[r] = lp;
        }
        let mut actions = squashed.clone();
        for r in 0..rows {
            for (i, v) in actions.row_mut(r).iter_mut().enumerate() {
                *v = self.bounds.center(i) + self.bounds.half_range(i) * *v;
            }
        }
        if !actions.is_finite() || log_prob.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy sample".into()));
        }
        Ok(SquashedSample { squashed, actions, log_prob })
    }

    /// Exploration action: a squashed-Gaussian sample, or the deterministic
    /// action plus clipped Gaussian noise of std `noise_std·half_range`.
    pub fn explore<R: Rng + ?Sized>(&self, state: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        let s = Tensor2::from_vec(1, state.len(), state.to_vec())?;
        match self.kind {
            PolicyKind::Gaussian => {
                let head = gaussian_head(&self.net.predict(&s)?, self.act_dim())?;
                let xi = standard_normal(1, self.act_dim(), rng);
                Ok(self.sample_with_noise(&head, &xi)?.actions.into_vec())
            }
            PolicyKind::Deterministic => {
                let a = self.deterministic_actions(&s)?.into_vec();
                Ok(a.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let n: f64 = rng.sample(StandardNormal);
                        (v + noise_std * self.bounds.half_range(i) * n).clamp(self.bounds.low[i], self.bounds.high[i])
                    })
                    .collect())
            }
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor2::from_vec(rows, cols, data).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> ActionBounds {
        ActionBounds::new(vec![-2.0, 0.0], vec![2.0, 1.0]).unwrap()
    }

    #[test]
    fn zero_features_give_centre_action() {
        let head = gaussian_head(&Tensor2::zeros(1, 4), 2).unwrap();
        assert!(head.mean.data().iter().all(|&v| v == 0.0));
        let mut p = Policy::new(3, &[8], PolicyKind::Gaussian, bounds(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        p.net.zero_output_layer();
        let a = p.deterministic_action(&[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(&*a, &[0.0, 0.5]);
    }

    #[test]
    fn log_std_is_clamped() {
        let f = Tensor2::from_rows(&[[0.0, -35.0], [0.0, 9.0]]).unwrap();
        let head = gaussian_head(&f, 1).unwrap();
        assert_eq!(head.log_std.data(), &[LOG_STD_MIN, LOG_STD_MAX]);
        assert_eq!(head.clamped, vec![true, true]);
        assert!(gaussian_head(&Tensor2::zeros(1, 3), 1).is_err());
        let bad = Tensor2::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(matches!(gaussian_head(&bad, 1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn seeded_sample_is_bit_exact() {
        let p = Policy::new(2, &[16], PolicyKind::Gaussian, bounds(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let a = p.explore(&[0.1, 0.2], 0.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = p.explore(&[0.1, 0.2], 0.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(p.bounds.contains(&a));
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        // 1-D, mean 0.3, log_std −0.5, half range 2: density of a = 2·tanh(u).
        let b = ActionBounds::symmetric(1, 2.0).unwrap();
        let p = Policy::new(1, &[4], PolicyKind::Gaussian, b, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let head = gaussian_head(&Tensor2::from_rows(&[[0.3, -0.5]]).unwrap(), 1).unwrap();
        let xi = Tensor2::from_rows(&[[0.7]]).unwrap();
        let s = p.sample_with_noise(&head, &xi).unwrap();
        let sigma = (-0.5f64).exp();
        let u = 0.3 + sigma * 0.7;
        let normal = (-0.5 * 0.7f64 * 0.7).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let jac = 2.0 * (1.0 - u.tanh().powi(2));
        assert!((s.log_prob[0] - (normal / jac).ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_matches_head_mean_path() {
        let p = Policy::new(3, &[8, 8], PolicyKind::Gaussian, bounds(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = p.deterministic_action(&s).unwrap();
            let out = p.net.predict(&Tensor2::from_rows(std::slice::from_ref(&s)).unwrap()).unwrap();
            let head = gaussian_head(&out, 2).unwrap();
            for i in 0..2 {
                let want = p.bounds.center(i) + p.bounds.half_range(i) * head.mean.get(0, i).tanh();
                assert_eq!(got[i], want);
            }
            assert_eq!(got, p.deterministic_action(&s).unwrap());
        }
    }
}
