use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sac,
    Td3,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::Td3 => "td3",
        }
    }
}

/// SAC entropy temperature handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntropyMode {
    Fixed {
        alpha: f64,
    },
    /// Tuned toward a target entropy of `−dim(A)`.
    Auto {
        initial_alpha: f64,
    },
}

impl Default for EntropyMode {
    fn default() -> Self {
        EntropyMode::Auto { initial_alpha: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Td3Config {
    #[serde(default = "d_delay")]
    pub policy_delay: u64,
    /// Target smoothing noise std, in units of the action half-range.
    #[serde(default = "d_target_noise")]
    pub target_noise: f64,
    #[serde(default = "d_noise_clip")]
    pub noise_clip: f64,
    #[serde(default = "d_explore")]
    pub exploration_noise: f64,
    /// Single critic, no delay, no target smoothing.
    #[serde(default)]
    pub ddpg: bool,
}

fn d_delay() -> u64 {
    2
}
fn d_target_noise() -> f64 {
    0.2
}
fn d_noise_clip() -> f64 {
    0.5
}
fn d_explore() -> f64 {
    0.1
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            policy_delay: d_delay(),
            target_noise: d_target_noise(),
            noise_clip: d_noise_clip(),
            exploration_noise: d_explore(),
            ddpg: false,
        }
    }
}

impl Td3Config {
    pub fn twin_critics(&self) -> bool {
        !self.ddpg
    }

    pub fn effective_delay(&self) -> u64 {
        if self.ddpg {
            1
        } else {
            self.policy_delay
        }
    }

    pub fn effective_target_noise(&self) -> f64 {
        if self.ddpg {
            0.0
        } else {
            self.target_noise
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_lr")]
    pub actor_lr: f64,
    #[serde(default = "d_lr")]
    pub critic_lr: f64,
    #[serde(default = "d_lr")]
    pub alpha_lr: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_capacity")]
    pub buffer_capacity: usize,
    #[serde(default)]
    pub entropy: EntropyMode,
    #[serde(default)]
    pub td3: Td3Config,
}

fn d_gamma() -> f64 {
    0.99
}
fn d_tau() -> f64 {
    0.005
}
fn d_lr() -> f64 {
    3e-4
}
fn d_batch() -> usize {
    256
}
fn d_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn d_capacity() -> usize {
    1_000_000
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            gamma: d_gamma(),
            tau: d_tau(),
            actor_lr: d_lr(),
            critic_lr: d_lr(),
            alpha_lr: d_lr(),
            batch_size: d_batch(),
            hidden: d_hidden(),
            buffer_capacity: d_capacity(),
            entropy: EntropyMode::default(),
            td3: Td3Config::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if [self.actor_lr, self.critic_lr, self.alpha_lr].iter().any(|lr| !(*lr > 0.0) || !lr.is_finite()) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.buffer_capacity < 3 {
            return bad("buffer capacity must hold at least one triple");
        }
        match self.entropy {
            EntropyMode::Fixed { alpha } | EntropyMode::Auto { initial_alpha: alpha } if !(alpha > 0.0) => {
                return bad("entropy temperature must be positive");
            }
            _ => {}
        }
        let t = &self.td3;
        if t.policy_delay == 0 || !(t.target_noise >= 0.0) || !(t.noise_clip >= 0.0) || !(t.exploration_noise >= 0.0) {
            return bad("td3 delay must be positive and noise scales nonnegative");
        }
        Ok(())
    }
}
