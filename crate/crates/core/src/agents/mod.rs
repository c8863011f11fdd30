//! Actor-critic agents with smoothness-regularized actor objectives.

mod config;
mod objective;
mod policy;
mod replay;
mod sac;
mod td3;

pub use config::{AgentConfig, Algorithm, EntropyMode, Td3Config};
pub use objective::{
    actor_loss_with_regularizer, critic_loss_and_grads, critic_value_and_action_grad, ActorInputs, ActorLoss,
    CriticReduce,
};
pub use policy::{
    gaussian_head, standard_normal, GaussianHead, Policy, PolicyKind, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use replay::{ReplayBuffer, Transition, TripleBatch};
pub use sac::SacAgent;
pub use td3::Td3Agent;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, OutputActivation};
use crate::rng::StreamRng;
use crate::smoothness::{ActionBounds, RegularizerSpec};
use crate::tensor::Tensor2;

/// What one gradient update reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    pub critic_loss: f64,
    /// `None` when the actor step was skipped by the policy delay.
    pub actor: Option<ActorLoss>,
    pub alpha: Option<f64>,
    pub q_mean: f64,
}

/// Randomness consumed by one update, one stream per concern.
pub struct UpdateRngs<'a> {
    pub policy_noise: &'a mut StreamRng,
    pub spatial: &'a mut StreamRng,
}

pub(crate) fn new_critic<R: Rng + ?Sized>(
    obs_dim: usize,
    act_dim: usize,
    hidden: &[usize],
    rng: &mut R,
) -> Result<DenseNet> {
    let mut sizes = vec![obs_dim + act_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    DenseNet::new(&sizes, Activation::Relu, OutputActivation::Identity, rng)
}

/// Per-row minimum of the given critics at `(states, actions)`.
pub(crate) fn min_q(critics: &[DenseNet], states: &Tensor2, actions: &Tensor2) -> Result<Vec<f64>> {
    let input = states.hcat(actions)?;
    let mut out = vec![f64::INFINITY; input.rows()];
    for c in critics {
        let q = c.predict(&input)?;
        for (o, v) in out.iter_mut().zip(q.data()) {
            *o = o.min(*v);
        }
    }
    Ok(out)
}

/// Gaussian state perturbations for the spatial term, drawn only when that
/// term is active so vanilla runs consume no extra randomness.
pub(crate) fn spatial_noise(spec: &RegularizerSpec, like: &Tensor2, rng: &mut StreamRng) -> Option<Tensor2> {
    spec.spatial_active().then(|| {
        let mut n = standard_normal(like.rows(), like.cols(), rng);
        n.data_mut().iter_mut().for_each(|v| *v *= spec.spatial_sigma);
        n
    })
}

/// Turns a numeric failure inside an update into an abort carrying context.
pub(crate) fn abort_on_nonfinite<T>(r: Result<T>, context: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite(what) => Error::Aborted(format!("non-finite {what}\n{}", context())),
        other => other,
    })
}

/// Either algorithm behind one interface.
#[derive(Debug, Clone)]
pub enum Agent {
    Sac(SacAgent),
    Td3(Td3Agent),
}

impl Agent {
    pub fn new(
        obs_dim: usize,
        bounds: ActionBounds,
        config: AgentConfig,
        regularizer: RegularizerSpec,
        init_rng: &mut StreamRng,
    ) -> Result<Self> {
        config.validate()?;
        regularizer.validate()?;
        Ok(match config.algorithm {
            Algorithm::Sac => Agent::Sac(SacAgent::new(obs_dim, bounds, config, regularizer, init_rng)?),
            Algorithm::Td3 => Agent::Td3(Td3Agent::new(obs_dim, bounds, config, regularizer, init_rng)?),
        })
    }

    pub fn policy(&self) -> &Policy {
        match self {
            Agent::Sac(a) => &a.actor,
            Agent::Td3(a) => &a.actor,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        match self {
            Agent::Sac(a) => &a.config,
            Agent::Td3(a) => &a.config,
        }
    }

    pub fn explore(&self, state: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        match self {
            Agent::Sac(a) => a.actor.explore(state, 0.0, rng),
            Agent::Td3(a) => a.actor.explore(state, a.config.td3.exploration_noise, rng),
        }
    }

    pub fn update(&mut self, batch: &TripleBatch, rngs: UpdateRngs<'_>) -> Result<UpdateDiagnostics> {
        match self {
            Agent::Sac(a) => a.update(batch, rngs),
            Agent::Td3(a) => a.update(batch, rngs),
        }
    }
}
