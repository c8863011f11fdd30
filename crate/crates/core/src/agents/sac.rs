use crate::error::Result;
use crate::nn::DenseNet;
use crate::optim::{adam_step, adam_step_net, AdamConfig, AdamState};
use crate::rng::StreamRng;
use crate::smoothness::{ActionBounds, RegularizerSpec};

use super::objective::{actor_loss_with_regularizer, critic_loss_and_grads, ActorInputs, CriticReduce};
use super::policy::{gaussian_head, standard_normal, Policy, PolicyKind};
use super::replay::TripleBatch;
use super::{
    abort_on_nonfinite, min_q, new_critic, spatial_noise, AgentConfig, EntropyMode, UpdateDiagnostics, UpdateRngs,
};

/// Soft actor-critic with twin critics and optional automatic temperature.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub config: AgentConfig,
    pub regularizer: RegularizerSpec,
    pub actor: Policy,
    pub critics: Vec<DenseNet>,
    pub critic_targets: Vec<DenseNet>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    log_alpha: f64,
    alpha_opt: AdamState,
    target_entropy: f64,
    updates: u64,
}

impl SacAgent {
    pub fn new(
        obs_dim: usize,
        bounds: ActionBounds,
        config: AgentConfig,
        regularizer: RegularizerSpec,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let act_dim = bounds.dim();
        let actor = Policy::new(obs_dim, &config.hidden, PolicyKind::Gaussian, bounds, rng)?;
        let critics = (0..2).map(|_| new_critic(obs_dim, act_dim, &config.hidden, rng)).collect::<Result<Vec<_>>>()?;
        let alpha0 = match config.entropy {
            EntropyMode::Fixed { alpha } => alpha,
            EntropyMode::Auto { initial_alpha } => initial_alpha,
        };
        Ok(Self {
            actor_opt: AdamState::for_net(&actor.net),
            critic_opts: critics.iter().map(AdamState::for_net).collect(),
            critic_targets: critics.clone(),
            critics,
            actor,
            log_alpha: alpha0.ln(),
            alpha_opt: AdamState::new(1),
            target_entropy: -(act_dim as f64),
            updates: 0,
            config,
            regularizer,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn targets(&self, batch: &TripleBatch, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let d = self.actor.act_dim();
        let head = gaussian_head(&self.actor.net.predict(&batch.s_next)?, d)?;
        let xi = standard_normal(batch.len(), d, rng);
        let next = self.actor.sample_with_noise(&head, &xi)?;
        let q = min_q(&self.critic_targets, &batch.s_next, &next.actions)?;
        let alpha = self.alpha();
        Ok((0..batch.len())
            .map(|i| {
                let cont = if batch.done[i] { 0.0 } else { 1.0 };
                batch.r[i] + self.config.gamma * cont * (q[i] - alpha * next.log_prob[i])
            })
            .collect())
    }

    pub fn update(&mut self, batch: &TripleBatch, rngs: UpdateRngs<'_>) -> Result<UpdateDiagnostics> {
        let n = self.updates;
        let dump = |stage: &str| format!("sac update {n}, stage {stage}");
        let y = abort_on_nonfinite(self.targets(batch, rngs.policy_noise), || dump("targets"))?;

        let input = batch.s.hcat(&batch.a)?;
        let critic_cfg = AdamConfig::with_lr(self.config.critic_lr);
        let mut critic_loss = 0.0;
        for (c, opt) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()) {
            let (loss, g) = abort_on_nonfinite(critic_loss_and_grads(c, &input, &y), || dump("critic"))?;
            if !loss.is_finite() || !g.is_finite() {
                return Err(crate::Error::Aborted(format!("{}: critic loss {loss}", dump("critic"))));
            }
            adam_step_net(c, &g, opt, &critic_cfg)?;
            critic_loss += loss;
        }
        critic_loss /= self.critics.len() as f64;

        let xi = standard_normal(batch.len(), self.actor.act_dim(), rngs.policy_noise);
        let nu = spatial_noise(&self.regularizer, &batch.s, rngs.spatial);
        let inputs = ActorInputs {
            critics: &self.critics,
            reduce: CriticReduce::Min,
            alpha: self.alpha(),
            xi: Some(&xi),
            spatial_noise: nu.as_ref(),
        };
        let (actor_loss, g) =
            abort_on_nonfinite(actor_loss_with_regularizer(&self.actor, batch, &self.regularizer, &inputs), || {
                dump("actor")
            })?;
        adam_step_net(&mut self.actor.net, &g, &mut self.actor_opt, &AdamConfig::with_lr(self.config.actor_lr))?;

        if let EntropyMode::Auto { .. } = self.config.entropy {
            let mlp = actor_loss.mean_log_prob.unwrap_or_default();
            // d/d log α of −log α · (log π + H̄)
            let grad = -(mlp + self.target_entropy);
            let mut p = [self.log_alpha];
            adam_step(&mut p, &[grad], &mut self.alpha_opt, &AdamConfig::with_lr(self.config.alpha_lr))?;
            self.log_alpha = p[0];
        }

        for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, self.config.tau);
        }
        self.updates += 1;
        Ok(UpdateDiagnostics {
            critic_loss,
            actor: Some(actor_loss),
            alpha: Some(self.alpha()),
            q_mean: y.iter().sum::<f64>() / y.len() as f64,
        })
    }
}
