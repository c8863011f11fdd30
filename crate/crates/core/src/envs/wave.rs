//! Wave trajectory tracking.
//!
//! The agent observes `[dist_t, pos_t]` and predicts the next target point.
//! Its position jumps to the prediction; the reward is the negative
//! prediction error against the next point of the reference wave.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{EnvState, Environment};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::smoothness::ActionBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    Square,
    Cosine,
}

impl WaveKind {
    pub fn label(self) -> &'static str {
        match self {
            WaveKind::Square => "square",
            WaveKind::Cosine => "cosine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub wave: WaveKind,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: usize,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
    #[serde(default = "default_action_limit")]
    pub action_limit: f64,
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_period() -> usize {
    50
}
fn default_episode_length() -> usize {
    200
}
fn default_action_limit() -> f64 {
    2.0
}

impl WaveSpec {
    pub fn new(wave: WaveKind) -> Self {
        Self {
            wave,
            amplitude: default_amplitude(),
            period: default_period(),
            episode_length: default_episode_length(),
            action_limit: default_action_limit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(Error::InvalidParameter("wave period must be at least 2 steps".into()));
        }
        if self.episode_length < self.period {
            return Err(Error::InvalidParameter("episode length must cover at least one period".into()));
        }
        if !self.amplitude.is_finite() || !(self.action_limit > 0.0) || !self.action_limit.is_finite() {
            return Err(Error::InvalidParameter("wave amplitude/action limit must be finite, limit positive".into()));
        }
        Ok(())
    }
}

/// Reference value at step `t`.
pub fn waveform_value(spec: &WaveSpec, t: usize) -> f64 {
    let phase = t % spec.period;
    match spec.wave {
        WaveKind::Square => {
            // `phase < period/2` with real division.
            if 2 * phase < spec.period {
                spec.amplitude
            } else {
                -spec.amplitude
            }
        }
        WaveKind::Cosine => spec.amplitude * (2.0 * PI * phase as f64 / spec.period as f64).cos(),
    }
}

#[derive(Debug, Clone)]
pub struct WaveEnv {
    spec: WaveSpec,
    bounds: ActionBounds,
    t: usize,
    done: bool,
}

impl WaveEnv {
    pub fn new(spec: WaveSpec) -> Result<Self> {
        spec.validate()?;
        let bounds = ActionBounds::symmetric(1, spec.action_limit)?;
        Ok(Self { spec, bounds, t: 0, done: true })
    }

    pub fn spec(&self) -> &WaveSpec {
        &self.spec
    }

    /// Deterministic reset; `pos₀` sits on the wave.
    pub fn reset_state(&mut self) -> EnvState {
        self.t = 0;
        self.done = false;
        EnvState { observation: vec![0.0, waveform_value(&self.spec, 0)], step: 0, done: false, truncated: false }
    }
}

impl Environment for WaveEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    fn episode_length(&self) -> usize {
        self.spec.episode_length
    }

    fn reset(&mut self, _rng: &mut StreamRng) -> EnvState {
        self.reset_state()
    }

    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if action.len() != 1 {
            return Err(Error::DimMismatch { expected: 1, got: action.len() });
        }
        if !action[0].is_finite() {
            return Err(Error::NonFinite("wave action".into()));
        }
        let pos = action[0].clamp(-self.spec.action_limit, self.spec.action_limit);
        self.t += 1;
        let target = waveform_value(&self.spec, self.t);
        let dist = (pos - target).abs();
        self.done = self.t >= self.spec.episode_length;
        let state = EnvState { observation: vec![dist, pos], step: self.t, done: self.done, truncated: self.done };
        Ok((state, -dist))
    }

    fn reference(&self) -> Option<f64> {
        Some(waveform_value(&self.spec, self.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn square() -> WaveSpec {
        WaveSpec::new(WaveKind::Square)
    }

    fn cosine() -> WaveSpec {
        WaveSpec::new(WaveKind::Cosine)
    }

    #[test]
    fn waveform_examples() {
        assert_eq!(waveform_value(&square(), 0), 1.0);
        assert_eq!(waveform_value(&square(), 24), 1.0);
        assert_eq!(waveform_value(&square(), 25), -1.0);
        assert_eq!(waveform_value(&square(), 50), 1.0);
        assert_eq!(waveform_value(&cosine(), 0), 1.0);
        assert!((waveform_value(&cosine(), 25) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_period_square_wave_splits_on_real_half() {
        let spec = WaveSpec { period: 5, ..square() };
        let v: Vec<f64> = (0..5).map(|t| waveform_value(&spec, t)).collect();
        assert_eq!(v, vec![1.0, 1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn reset_observations() {
        let mut rng = StreamRng::seed_from_u64(0);
        for spec in [square(), cosine()] {
            let mut env = WaveEnv::new(spec).unwrap();
            let a = env.reset(&mut rng);
            let b = env.reset(&mut rng);
            assert_eq!(a.observation, vec![0.0, 1.0]);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn step_rewards() {
        let mut env = WaveEnv::new(square()).unwrap();
        env.reset_state();
        let (s, r) = env.step(&[1.0]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(s.observation, vec![0.0, 1.0]);
        let (s, r) = env.step(&[0.0]).unwrap();
        assert_eq!(r, -1.0);
        assert_eq!(s.observation, vec![1.0, 0.0]);
    }

    #[test]
    fn oracle_agent_scores_zero_and_done_blocks_steps() {
        for spec in [square(), cosine()] {
            let mut env = WaveEnv::new(spec.clone()).unwrap();
            let mut state = env.reset_state();
            let mut ret = 0.0;
            let mut steps = 0;
            while !state.done {
                let (s, r) = env.step(&[waveform_value(&spec, state.step + 1)]).unwrap();
                ret += r;
                steps += 1;
                state = s;
            }
            assert_eq!(ret, 0.0);
            assert_eq!(steps, spec.episode_length);
            assert!(state.truncated);
            assert!(matches!(env.step(&[0.0]), Err(Error::EpisodeDone)));
        }
    }

    #[test]
    fn actions_are_clipped_and_rewards_bounded() {
        let spec = square();
        let mut env = WaveEnv::new(spec.clone()).unwrap();
        env.reset_state();
        let (s, r) = env.step(&[100.0]).unwrap();
        assert_eq!(s.observation[1], 2.0);
        assert!(r >= -(spec.action_limit + spec.amplitude) && r <= 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(WaveEnv::new(WaveSpec { period: 1, ..square() }).is_err());
        assert!(WaveEnv::new(WaveSpec { episode_length: 10, ..square() }).is_err());
    }
}
