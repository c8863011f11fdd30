//! Actor and critic objectives with hand-derived gradients.

use crate::error::{Error, Result};
use crate::nn::{DenseNet, GradTape, NetGrads};
use crate::smoothness::{caps_temporal_grad, temporal_term_grad, RegularizerSpec};
use crate::tensor::Tensor2;

use super::policy::{gaussian_head, Policy, PolicyKind};
use super::replay::TripleBatch;

/// How the actor reads the critics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticReduce {
    /// Pessimistic minimum over all critics (SAC).
    Min,
    /// First critic only (TD3/DDPG actor).
    First,
}

/// Everything the actor loss needs besides the policy and the batch.
#[derive(Debug, Clone, Copy)]
pub struct ActorInputs<'a> {
    pub critics: &'a [DenseNet],
    pub reduce: CriticReduce,
    /// Entropy temperature; only read for Gaussian policies.
    pub alpha: f64,
    /// Reparameterization noise, `batch × act_dim`, for Gaussian policies.
    pub xi: Option<&'a Tensor2>,
    /// State perturbations for the spatial term, `batch × obs_dim`.
    pub spatial_noise: Option<&'a Tensor2>,
}

/// Actor loss broken into its parts. `temporal` and `spatial` are already
/// multiplied by their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorLoss {
    pub base: f64,
    pub temporal: f64,
    pub spatial: f64,
    pub total: f64,
    pub mean_log_prob: Option<f64>,
}

/// Per-row critic value (reduced) and its gradient with respect to actions.
pub fn critic_value_and_action_grad(
    critics: &[DenseNet],
    reduce: CriticReduce,
    states: &Tensor2,
    actions: &Tensor2,
) -> Result<(Vec<f64>, Tensor2)> {
    let used = match reduce {
        CriticReduce::Min => critics,
        CriticReduce::First => &critics[..critics.len().min(1)],
    };
    if used.is_empty() {
        return Err(Error::InvalidParameter("actor objective needs at least one critic".into()));
    }
    let input = states.hcat(actions)?;
    let rows = input.rows();
    let mut tapes = Vec::with_capacity(used.len());
    let mut values = Vec::with_capacity(used.len());
    for c in used {
        let mut tape = GradTape::new();
        values.push(c.forward(&input, &mut tape)?);
        tapes.push(tape);
    }
    let mut q = vec![0.0; rows];
    let mut pick = vec![0usize; rows];
    for r in 0..rows {
        let (mut best, mut best_k) = (values[0].get(r, 0), 0);
        for (k, v) in values.iter().enumerate().skip(1) {
            if v.get(r, 0) < best {
                best = v.get(r, 0);
                best_k = k;
            }
        }
        q[r] = best;
        pick[r] = best_k;
    }
    let obs_dim = states.cols();
    let mut dq_da = Tensor2::zeros(rows, actions.cols());
    for (k, (c, tape)) in used.iter().zip(tapes.iter_mut()).enumerate() {
        let sel: Vec<f64> = pick.iter().map(|&p| if p == k { 1.0 } else { 0.0 }).collect();
        if sel.iter().all(|&v| v == 0.0) {
            continue;
        }
        let g_in = c.backward_input(tape, &Tensor2::from_vec(rows, 1, sel)?)?;
        for r in 0..rows {
            for (d, g) in dq_da.row_mut(r).iter_mut().zip(&g_in.row(r)[obs_dim..]) {
                *d += g;
            }
        }
    }
    Ok((q, dq_da))
}

/// `d a / d mean` for `a = center + h·tanh(mean)`.
fn squash_slope(policy: &Policy, mean: &Tensor2, r: usize, i: usize) -> f64 {
    let t = mean.get(r, i).tanh();
    policy.bounds.half_range(i) * (1.0 - t * t)
}

struct Branch {
    tape: GradTape,
    mean: Tensor2,
    actions: Tensor2,
    out_grad: Tensor2,
}

impl Branch {
    fn new(policy: &Policy, states: &Tensor2) -> Result<(Self, Tensor2)> {
        let mut tape = GradTape::new();
        let out = policy.forward(states, &mut tape)?;
        let mean = policy.mean_of(&out);
        let actions = policy.squash(&mean);
        let out_grad = Tensor2::zeros(out.rows(), out.cols());
        Ok((Self { tape, mean, actions, out_grad }, out))
    }

    /// Adds `dL/da` for deterministic action `(r, i)` into the mean column.
    fn add_action_grad(&mut self, policy: &Policy, r: usize, i: usize, g: f64) {
        let slope = squash_slope(policy, &self.mean, r, i);
        let cur = self.out_grad.get(r, i);
        self.out_grad.set(r, i, cur + g * slope);
    }
}

/// Standard actor loss plus `λ_t`·temporal and `λ_s`·spatial smoothness terms,
/// with the gradient with respect to every policy parameter.
///
/// CAPS compares `π(s)` and `π(s_next)`; Grad-CAPS uses the stencil
/// `π(s_prev), π(s), π(s_next)`. All of them are recomputed from the current
/// policy so gradients reach every stencil point.
pub fn actor_loss_with_regularizer(
    policy: &Policy,
    batch: &TripleBatch,
    spec: &RegularizerSpec,
    inputs: &ActorInputs<'_>,
) -> Result<(ActorLoss, NetGrads)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if spec.kind.needs_prev_state() && batch.s_prev.is_none() {
        return Err(Error::MissingPrevState(spec.kind.label()));
    }
    let inv_n = 1.0 / n as f64;
    let d = policy.act_dim();
    let (mut main, out_s) = Branch::new(policy, &batch.s)?;

    let (base, mean_log_prob) = match policy.kind {
        PolicyKind::Gaussian => {
            let xi = inputs.xi.ok_or_else(|| Error::InvalidParameter("gaussian actor needs noise".into()))?;
            let head = gaussian_head(&out_s, d)?;
            let sample = policy.sample_with_noise(&head, xi)?;
            let (q, dq_da) = critic_value_and_action_grad(inputs.critics, inputs.reduce, &batch.s, &sample.actions)?;
            let alpha = inputs.alpha;
            let mut base = 0.0;
            for r in 0..n {
                base += alpha * sample.log_prob[r] - q[r];
                for i in 0..d {
                    let t = sample.squashed.get(r, i);
                    let h = policy.bounds.half_range(i);
                    let dl_du = -dq_da.get(r, i) * inv_n * h * (1.0 - t * t) + alpha * inv_n * 2.0 * t;
                    let gm = main.out_grad.get(r, i);
                    main.out_grad.set(r, i, gm + dl_du);
                    if !head.clamped[r * d + i] {
                        let sigma = head.log_std.get(r, i).exp();
                        let gs = main.out_grad.get(r, d + i);
                        main.out_grad.set(r, d + i, gs + dl_du * sigma * xi.get(r, i) - alpha * inv_n);
                    }
                }
            }
            let mlp = sample.log_prob.iter().sum::<f64>() * inv_n;
            (base * inv_n, Some(mlp))
        }
        PolicyKind::Deterministic => {
            let (q, dq_da) = critic_value_and_action_grad(inputs.critics, inputs.reduce, &batch.s, &main.actions)?;
            for r in 0..n {
                for i in 0..d {
                    main.add_action_grad(policy, r, i, -dq_da.get(r, i) * inv_n);
                }
            }
            (-q.iter().sum::<f64>() * inv_n, None)
        }
    };

    let mut extra: Vec<Branch> = Vec::new();
    let mut temporal = 0.0;
    if spec.temporal_active() {
        let (mut next, _) = Branch::new(policy, &batch.s_next)?;
        let mut prev = match (&batch.s_prev, spec.kind.needs_prev_state()) {
            (Some(sp), true) => Some(Branch::new(policy, sp)?.0),
            _ => None,
        };
        let scale = spec.lambda_t * inv_n;
        let mut sum = 0.0;
        for r in 0..n {
            let a_t = main.actions.row(r).to_vec();
            let a_next = next.actions.row(r).to_vec();
            let a_prev = prev.as_ref().map_or_else(|| a_t.clone(), |p| p.actions.row(r).to_vec());
            let tg = temporal_term_grad(spec.kind, &a_prev, &a_t, &a_next, spec.epsilon)?;
            sum += tg.loss;
            for i in 0..d {
                main.add_action_grad(policy, r, i, scale * tg.d_t[i]);
                next.add_action_grad(policy, r, i, scale * tg.d_next[i]);
                if let Some(p) = prev.as_mut() {
                    p.add_action_grad(policy, r, i, scale * tg.d_prev[i]);
                }
            }
        }
        temporal = spec.lambda_t * sum * inv_n;
        extra.push(next);
        extra.extend(prev);
    }

    let mut spatial = 0.0;
    if spec.spatial_active() {
        let noise =
            inputs.spatial_noise.ok_or_else(|| Error::InvalidParameter("spatial term needs state noise".into()))?;
        if noise.shape() != batch.s.shape() {
            return Err(Error::Shape("spatial noise shape does not match states".into()));
        }
        let mut perturbed = batch.s.clone();
        for (p, v) in perturbed.data_mut().iter_mut().zip(noise.data()) {
            *p += v;
        }
        let (mut near, _) = Branch::new(policy, &perturbed)?;
        let scale = spec.lambda_s * inv_n;
        let mut sum = 0.0;
        for r in 0..n {
            let tg = caps_temporal_grad(main.actions.row(r), near.actions.row(r))?;
            sum += tg.loss;
            for i in 0..d {
                main.add_action_grad(policy, r, i, scale * tg.d_t[i]);
                near.add_action_grad(policy, r, i, scale * tg.d_next[i]);
            }
        }
        spatial = spec.lambda_s * sum * inv_n;
        extra.push(near);
    }

    let mut grads = policy.net.backward(&mut main.tape, &main.out_grad)?.params;
    for mut b in extra {
        grads.add_assign(&policy.net.backward(&mut b.tape, &b.out_grad)?.params);
    }
    let loss = ActorLoss { base, temporal, spatial, total: base + temporal + spatial, mean_log_prob };
    if !loss.total.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!("actor loss {loss:?}")));
    }
    Ok((loss, grads))
}

/// Mean squared Bellman error `mean((Q(x) − y)²)` and its parameter gradient.
pub fn critic_loss_and_grads(critic: &DenseNet, inputs: &Tensor2, targets: &[f64]) -> Result<(f64, NetGrads)> {
    let n = inputs.rows();
    if targets.len() != n || n == 0 {
        return Err(Error::DimMismatch { expected: n, got: targets.len() });
    }
    let mut tape = GradTape::new();
    let q = critic.forward(inputs, &mut tape)?;
    let mut loss = 0.0;
    let mut g = Tensor2::zeros(n, 1);
    for r in 0..n {
        let e = q.get(r, 0) - targets[r];
        loss += e * e;
        g.set(r, 0, 2.0 * e / n as f64);
    }
    let grads = critic.backward(&mut tape, &g)?.params;
    Ok((loss / n as f64, grads))
}
