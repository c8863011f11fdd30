use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::DenseNet;
use crate::optim::{adam_step_net, AdamConfig, AdamState};
use crate::rng::StreamRng;
use crate::smoothness::{ActionBounds, RegularizerSpec};

use super::objective::{actor_loss_with_regularizer, critic_loss_and_grads, ActorInputs, CriticReduce};
use super::policy::{Policy, PolicyKind};
use super::replay::TripleBatch;
use super::{abort_on_nonfinite, min_q, new_critic, spatial_noise, AgentConfig, UpdateDiagnostics, UpdateRngs};

/// TD3, or DDPG when `td3.ddpg` is set.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub config: AgentConfig,
    pub regularizer: RegularizerSpec,
    pub actor: Policy,
    pub actor_target: Policy,
    pub critics: Vec<DenseNet>,
    pub critic_targets: Vec<DenseNet>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    updates: u64,
}

impl Td3Agent {
    pub fn new(
        obs_dim: usize,
        bounds: ActionBounds,
        config: AgentConfig,
        regularizer: RegularizerSpec,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let act_dim = bounds.dim();
        let actor = Policy::new(obs_dim, &config.hidden, PolicyKind::Deterministic, bounds, rng)?;
        let n_critics = if config.td3.twin_critics() { 2 } else { 1 };
        let critics =
            (0..n_critics).map(|_| new_critic(obs_dim, act_dim, &config.hidden, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            actor_opt: AdamState::for_net(&actor.net),
            critic_opts: critics.iter().map(AdamState::for_net).collect(),
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            critics,
            actor,
            updates: 0,
            config,
            regularizer,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn targets(&self, batch: &TripleBatch, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let mut a = self.actor_target.deterministic_actions(&batch.s_next)?;
        let sigma = self.config.td3.effective_target_noise();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let bounds = &self.actor.bounds;
            for r in 0..a.rows() {
                for (i, v) in a.row_mut(r).iter_mut().enumerate() {
                    let h = bounds.half_range(i);
                    let clip = self.config.td3.noise_clip * h;
                    let eps = (sigma * h * normal.sample(rng)).clamp(-clip, clip);
                    *v = (*v + eps).clamp(bounds.low[i], bounds.high[i]);
                }
            }
        }
        let q = min_q(&self.critic_targets, &batch.s_next, &a)?;
        Ok((0..batch.len())
            .map(|i| {
                let cont = if batch.done[i] { 0.0 } else { 1.0 };
                batch.r[i] + self.config.gamma * cont * q[i]
            })
            .collect())
    }

    pub fn update(&mut self, batch: &TripleBatch, rngs: UpdateRngs<'_>) -> Result<UpdateDiagnostics> {
        let n = self.updates;
        let dump = |stage: &str| format!("td3 update {n}, stage {stage}");
        let y = abort_on_nonfinite(self.targets(batch, rngs.policy_noise), || dump("targets"))?;

        let input = batch.s.hcat(&batch.a)?;
        let critic_cfg = AdamConfig::with_lr(self.config.critic_lr);
        let mut critic_loss = 0.0;
        for (c, opt) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()) {
            let (loss, g) = abort_on_nonfinite(critic_loss_and_grads(c, &input, &y), || dump("critic"))?;
            if !loss.is_finite() || !g.is_finite() {
                return Err(Error::Aborted(format!("{}: critic loss {loss}", dump("critic"))));
            }
            adam_step_net(c, &g, opt, &critic_cfg)?;
            critic_loss += loss;
        }
        critic_loss /= self.critics.len() as f64;

        self.updates += 1;
        let mut actor = None;
        if self.updates.is_multiple_of(self.config.td3.effective_delay()) {
            let nu = spatial_noise(&self.regularizer, &batch.s, rngs.spatial);
            let inputs = ActorInputs {
                critics: &self.critics,
                reduce: CriticReduce::First,
                alpha: 0.0,
                xi: None,
                spatial_noise: nu.as_ref(),
            };
            let (loss, g) = abort_on_nonfinite(
                actor_loss_with_regularizer(&self.actor, batch, &self.regularizer, &inputs),
                || dump("actor"),
            )?;
            adam_step_net(&mut self.actor.net, &g, &mut self.actor_opt, &AdamConfig::with_lr(self.config.actor_lr))?;
            actor = Some(loss);
            let tau = self.config.tau;
            self.actor_target.net.soft_update_from(&self.actor.net, tau);
            for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
                t.soft_update_from(c, tau);
            }
        }
        Ok(UpdateDiagnostics { critic_loss, actor, alpha: None, q_mean: y.iter().sum::<f64>() / y.len() as f64 })
    }
}
