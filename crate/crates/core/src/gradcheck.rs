//! Finite-difference verification of the hand-derived gradients.
//!
//! Each check draws random instances, computes the analytic gradient and
//! compares it with a central difference. Results are collected rather than
//! asserted so callers can report them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    actor_loss_with_regularizer, critic_loss_and_grads, standard_normal, ActorInputs, CriticReduce, Policy, PolicyKind,
    TripleBatch,
};
use crate::nn::{Activation, DenseNet, OutputActivation};
use crate::smoothness::{
    caps_temporal_loss, gradcaps_normalized_loss, gradcaps_raw_loss, temporal_term_grad, ActionBounds, RegularizerKind,
    RegularizerSpec,
};
use crate::tensor::Tensor2;

/// Sampling and tolerance settings shared by every check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub instances: usize,
    /// Central-difference half step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Parameters probed per network instance.
    pub params_per_instance: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { instances: 100, step: 1e-6, tolerance: 1e-4, params_per_instance: 16, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub instances: usize,
    pub comparisons: usize,
    pub max_rel_err: f64,
    pub failures: Vec<String>,
}

impl GradCheckReport {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), instances: 0, comparisons: 0, max_rel_err: 0.0, failures: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, cfg: &GradCheckConfig, analytic: f64, numeric: f64, what: impl FnOnce() -> String) {
        let e = rel_err(analytic, numeric);
        self.comparisons += 1;
        if e.is_nan() || e > self.max_rel_err {
            self.max_rel_err = if e.is_nan() { f64::INFINITY } else { e };
        }
        if !(e < cfg.tolerance) {
            self.failures.push(format!("{}: analytic {analytic} numeric {numeric} rel {e}", what()));
        }
    }
}

/// Relative error with a small absolute floor so near-zero pairs compare absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    Tensor2::from_vec(rows, cols, random_vec(rng, rows * cols, 1.0)).expect("shape matches data")
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, obs: usize, act: usize) -> TripleBatch {
    TripleBatch {
        s_prev: Some(random_tensor(rng, n, obs)),
        s: random_tensor(rng, n, obs),
        a: random_tensor(rng, n, act),
        r: random_vec(rng, n, 1.0),
        s_next: random_tensor(rng, n, obs),
        done: (0..n).map(|_| rng.gen_bool(0.1)).collect(),
    }
}

fn small_critic(rng: &mut ChaCha8Rng, obs: usize, act: usize) -> DenseNet {
    DenseNet::new(&[obs + act, 12, 12, 1], Activation::Relu, OutputActivation::Identity, rng).expect("valid sizes")
}

type PointLoss<'a> = &'a dyn Fn(&[f64], &[f64], &[f64]) -> f64;

fn check_points(
    report: &mut GradCheckReport,
    cfg: &GradCheckConfig,
    f: PointLoss<'_>,
    pts: [&[f64]; 3],
    grads: [&[f64]; 3],
    label: &str,
) {
    for k in 0..3 {
        for i in 0..pts[k].len() {
            let eval = |delta: f64| {
                let mut p: Vec<Vec<f64>> = pts.iter().map(|v| v.to_vec()).collect();
                p[k][i] += delta;
                f(&p[0], &p[1], &p[2])
            };
            let numeric = (eval(cfg.step) - eval(-cfg.step)) / (2.0 * cfg.step);
            report.record(cfg, grads[k][i], numeric, || format!("{label}: point {k} component {i}"));
        }
    }
}

fn check_params(
    report: &mut GradCheckReport,
    cfg: &GradCheckConfig,
    net: &DenseNet,
    analytic: &[f64],
    loss: &dyn Fn(&DenseNet) -> Option<f64>,
    rng: &mut ChaCha8Rng,
    label: &str,
) {
    let base = net.flat_params();
    if analytic.len() != base.len() {
        report.failures.push(format!("{label}: gradient length {} != parameter count {}", analytic.len(), base.len()));
        return;
    }
    for _ in 0..cfg.params_per_instance {
        let i = rng.gen_range(0..base.len());
        let eval = |delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            let mut m = net.clone();
            m.set_flat_params(&p).ok()?;
            loss(&m)
        };
        let numeric = match (eval(cfg.step), eval(-cfg.step)) {
            (Some(hi), Some(lo)) => (hi - lo) / (2.0 * cfg.step),
            _ => f64::NAN,
        };
        report.record(cfg, analytic[i], numeric, || format!("{label}: param {i}"));
    }
}

/// CAPS, raw Grad-CAPS and normalized Grad-CAPS pointwise terms.
pub fn check_regularizer_terms(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut report = GradCheckReport::new("regularizer terms");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11);
    for n in 0..cfg.instances {
        report.instances += 1;
        let d = 1 + n % 4;
        let a_prev = random_vec(&mut rng, d, 2.0);
        let a_t = random_vec(&mut rng, d, 2.0);
        let a_next = random_vec(&mut rng, d, 2.0);
        let eps = 10f64.powf(rng.gen_range(-4.0..0.0));
        let pts = [a_prev.as_slice(), a_t.as_slice(), a_next.as_slice()];

        let cases: [(RegularizerKind, PointLoss<'_>); 3] = [
            (RegularizerKind::Caps, &|_, t, nx| caps_temporal_loss(t, nx).unwrap_or(f64::NAN)),
            (RegularizerKind::GradcapsRaw, &|p, t, nx| gradcaps_raw_loss(p, t, nx).unwrap_or(f64::NAN)),
            (RegularizerKind::GradcapsNorm, &|p, t, nx| gradcaps_normalized_loss(p, t, nx, eps).unwrap_or(f64::NAN)),
        ];
        for (kind, f) in cases {
            let label = format!("{} instance {n}", kind.label());
            match temporal_term_grad(kind, &a_prev, &a_t, &a_next, eps) {
                Ok(g) => check_points(&mut report, cfg, f, pts, [&g.d_prev, &g.d_t, &g.d_next], &label),
                Err(e) => report.failures.push(format!("{label}: {e}")),
            }
        }
    }
    report
}

/// Full actor objective (critic value, entropy, temporal and spatial terms) w.r.t. policy parameters.
pub fn check_actor(kind: PolicyKind, cfg: &GradCheckConfig) -> GradCheckReport {
    let mut report = GradCheckReport::new(format!("{kind:?} actor"));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x21 ^ (kind as u64) << 8);
    let reg_kinds =
        [RegularizerKind::None, RegularizerKind::Caps, RegularizerKind::GradcapsRaw, RegularizerKind::GradcapsNorm];
    for n in 0..cfg.instances {
        report.instances += 1;
        let obs = 1 + n % 3;
        let act = 1 + n / 3 % 2;
        let rows = 3 + n % 4;
        let low: Vec<f64> = random_vec(&mut rng, act, 1.0).iter().map(|v| v - 1.5).collect();
        let bounds = ActionBounds::new(low, vec![1.5; act]).expect("low < high");
        let policy = Policy::new(obs, &[10, 10], kind, bounds, &mut rng).expect("valid sizes");
        let critics = vec![small_critic(&mut rng, obs, act), small_critic(&mut rng, obs, act)];
        let batch = random_batch(&mut rng, rows, obs, act);
        let mut spec = RegularizerSpec::with_kind(reg_kinds[n % 4], rng.gen_range(0.1..2.0));
        spec.epsilon = 10f64.powf(rng.gen_range(-3.0..-1.0));
        if n % 2 == 0 {
            spec.lambda_s = rng.gen_range(0.1..1.0);
        }
        let xi = standard_normal(rows, act, &mut rng);
        let nu = standard_normal(rows, obs, &mut rng);
        let inputs = ActorInputs {
            critics: &critics,
            reduce: if n % 3 == 0 { CriticReduce::First } else { CriticReduce::Min },
            alpha: rng.gen_range(0.05..0.5),
            xi: Some(&xi),
            spatial_noise: Some(&nu),
        };
        let label = format!("{kind:?} actor instance {n} ({}, lambda_s {})", spec.kind.label(), spec.lambda_s);
        let grads = match actor_loss_with_regularizer(&policy, &batch, &spec, &inputs) {
            Ok((_, g)) => g.flat(),
            Err(e) => {
                report.failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let loss = |net: &DenseNet| {
            let p = Policy { net: net.clone(), ..policy.clone() };
            actor_loss_with_regularizer(&p, &batch, &spec, &inputs).ok().map(|(l, _)| l.total)
        };
        check_params(&mut report, cfg, &policy.net, &grads, &loss, &mut rng, &label);
    }
    report
}

/// Mean-squared Bellman regression w.r.t. critic parameters.
pub fn check_critic(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut report = GradCheckReport::new("critic");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x31);
    for n in 0..cfg.instances {
        report.instances += 1;
        let obs = 1 + n % 3;
        let act = 1 + n % 2;
        let rows = 2 + n % 7;
        let c = small_critic(&mut rng, obs, act);
        let inputs = random_tensor(&mut rng, rows, obs + act);
        let targets = random_vec(&mut rng, rows, 3.0);
        let label = format!("critic instance {n}");
        let grads = match critic_loss_and_grads(&c, &inputs, &targets) {
            Ok((_, g)) => g.flat(),
            Err(e) => {
                report.failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let loss = |net: &DenseNet| critic_loss_and_grads(net, &inputs, &targets).ok().map(|(l, _)| l);
        check_params(&mut report, cfg, &c, &grads, &loss, &mut rng, &label);
    }
    report
}

/// Every check above: regularizer terms, both actor heads and the critic.
pub fn check_all(cfg: &GradCheckConfig) -> Vec<GradCheckReport> {
    vec![
        check_regularizer_terms(cfg),
        check_actor(PolicyKind::Gaussian, cfg),
        check_actor(PolicyKind::Deterministic, cfg),
        check_critic(cfg),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_flags_mismatch_and_nan() {
        let cfg = GradCheckConfig::default();
        let mut r = GradCheckReport::new("t");
        r.record(&cfg, 1.0, 1.0 + 1e-7, || "close".into());
        assert!(r.passed());
        r.record(&cfg, 1.0, 1.001, || "off".into());
        r.record(&cfg, 1.0, f64::NAN, || "nan".into());
        assert_eq!(r.failures.len(), 2);
        assert_eq!(r.comparisons, 3);
        assert!(r.max_rel_err.is_infinite());
    }

    #[test]
    fn rel_err_uses_absolute_floor_near_zero() {
        assert!(rel_err(0.0, 1e-10) < 1e-4);
        assert!((rel_err(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
