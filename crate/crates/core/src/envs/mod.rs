//! Environments behind one interface.

mod pendulum;
mod wave;

pub use pendulum::{angle_normalize, PendulumEnv, PendulumSpec};
pub use wave::{waveform_value, WaveEnv, WaveKind, WaveSpec};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::StreamRng;
use crate::smoothness::ActionBounds;

/// What the agent sees after a reset or a step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step: usize,
    /// Episode over; further steps are rejected.
    pub done: bool,
    /// The episode ended on a time limit rather than a terminal state, so
    /// value targets should still bootstrap.
    pub truncated: bool,
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn bounds(&self) -> &ActionBounds;
    fn episode_length(&self) -> usize;
    fn reset(&mut self, rng: &mut StreamRng) -> EnvState;
    /// Applies `action` (clipped to bounds) and returns the new state and reward.
    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)>;
    /// Reference signal at the current step, for tracking tasks.
    fn reference(&self) -> Option<f64> {
        None
    }
}

/// Serializable environment selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvSpec {
    Wave(WaveSpec),
    Pendulum(PendulumSpec),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Wave(w) => w.validate(),
            EnvSpec::Pendulum(p) => p.validate(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Wave(w) => Box::new(WaveEnv::new(w.clone())?),
            EnvSpec::Pendulum(p) => Box::new(PendulumEnv::new(p.clone())?),
        })
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Wave(w) => format!("wave-{}", w.wave.label()),
            EnvSpec::Pendulum(_) => "pendulum".to_string(),
        }
    }
}
