//! Pendulum swing-up with the classic constants: `θ = 0` is upright.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvState, Environment};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::smoothness::ActionBounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumSpec {
    #[serde(default = "d_mass")]
    pub mass: f64,
    #[serde(default = "d_length")]
    pub length: f64,
    #[serde(default = "d_gravity")]
    pub gravity: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_max_torque")]
    pub max_torque: f64,
    #[serde(default = "d_max_speed")]
    pub max_speed: f64,
    #[serde(default = "d_episode_length")]
    pub episode_length: usize,
}

fn d_mass() -> f64 {
    1.0
}
fn d_length() -> f64 {
    1.0
}
fn d_gravity() -> f64 {
    10.0
}
fn d_dt() -> f64 {
    0.05
}
fn d_max_torque() -> f64 {
    2.0
}
fn d_max_speed() -> f64 {
    8.0
}
fn d_episode_length() -> usize {
    200
}

impl Default for PendulumSpec {
    fn default() -> Self {
        Self {
            mass: d_mass(),
            length: d_length(),
            gravity: d_gravity(),
            dt: d_dt(),
            max_torque: d_max_torque(),
            max_speed: d_max_speed(),
            episode_length: d_episode_length(),
        }
    }
}

impl PendulumSpec {
    pub fn validate(&self) -> Result<()> {
        let consts = [self.mass, self.length, self.gravity, self.dt, self.max_torque, self.max_speed];
        if consts.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter("pendulum constants must be positive".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidParameter("pendulum episode length must be positive".into()));
        }
        Ok(())
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone)]
pub struct PendulumEnv {
    spec: PendulumSpec,
    bounds: ActionBounds,
    theta: f64,
    theta_dot: f64,
    t: usize,
    done: bool,
}

impl PendulumEnv {
    pub fn new(spec: PendulumSpec) -> Result<Self> {
        spec.validate()?;
        let bounds = ActionBounds::symmetric(1, spec.max_torque)?;
        Ok(Self { spec, bounds, theta: PI, theta_dot: 0.0, t: 0, done: true })
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, theta: f64, theta_dot: f64) -> EnvState {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.t = 0;
        self.done = false;
        self.state()
    }

    pub fn angle(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    /// Mechanical energy of a uniform rod pivoted at one end.
    pub fn energy(&self) -> f64 {
        let s = &self.spec;
        let inertia = s.mass * s.length * s.length / 3.0;
        0.5 * inertia * self.theta_dot * self.theta_dot + s.mass * s.gravity * s.length / 2.0 * self.theta.cos()
    }

    fn state(&self) -> EnvState {
        EnvState {
            observation: vec![self.theta.cos(), self.theta.sin(), self.theta_dot],
            step: self.t,
            done: self.done,
            truncated: self.done,
        }
    }
}

impl Environment for PendulumEnv {
    fn obs_dim(&self) -> usize {
        3
    }

    fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    fn episode_length(&self) -> usize {
        self.spec.episode_length
    }

    fn reset(&mut self, rng: &mut StreamRng) -> EnvState {
        let theta = rng.gen_range(-PI..PI);
        let theta_dot = rng.gen_range(-1.0..1.0);
        self.reset_to(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if action.len() != 1 {
            return Err(Error::DimMismatch { expected: 1, got: action.len() });
        }
        if !action[0].is_finite() {
            return Err(Error::NonFinite("pendulum torque".into()));
        }
        let s = &self.spec;
        let u = action[0].clamp(-s.max_torque, s.max_torque);
        let th = angle_normalize(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * s.gravity / (2.0 * s.length) * self.theta.sin() + 3.0 / (s.mass * s.length * s.length) * u;
        self.theta_dot = (self.theta_dot + accel * s.dt).clamp(-s.max_speed, s.max_speed);
        self.theta += self.theta_dot * s.dt;
        self.t += 1;
        self.done = self.t >= s.episode_length;
        Ok((self.state(), reward))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn upright_at_rest_has_zero_reward() {
        let mut env = PendulumEnv::new(PendulumSpec::default()).unwrap();
        env.reset_to(0.0, 0.0);
        let (_, r) = env.step(&[0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn hanging_at_rest_costs_pi_squared() {
        let mut env = PendulumEnv::new(PendulumSpec::default()).unwrap();
        let s = env.reset_to(PI, 0.0);
        assert_eq!(s.observation.len(), 3);
        let (_, r) = env.step(&[0.0]).unwrap();
        assert!((r + PI * PI).abs() < 1e-12, "{r}");
    }

    #[test]
    fn zero_torque_energy_does_not_drift() {
        // Semi-implicit Euler oscillates around the true energy; compare
        // 100-step window means against the energy scale m·g·l.
        let spec = PendulumSpec { episode_length: 1000, ..PendulumSpec::default() };
        let scale = spec.mass * spec.gravity * spec.length;
        let mut rng = StreamRng::seed_from_u64(5);
        for _ in 0..20 {
            let mut env = PendulumEnv::new(spec.clone()).unwrap();
            let theta0 = rng.gen_range(1.8..PI);
            env.reset_to(theta0, rng.gen_range(-0.5..0.5));
            let mut windows = Vec::new();
            let mut acc = 0.0;
            for k in 1..=1000 {
                if env.done {
                    break;
                }
                env.step(&[0.0]).unwrap();
                acc += env.energy();
                if k % 100 == 0 {
                    windows.push(acc / 100.0);
                    acc = 0.0;
                }
            }
            for w in windows.windows(2) {
                assert!(w[1] - w[0] < 0.01 * scale, "theta0 {theta0}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn random_reset_is_seeded() {
        let mut a = PendulumEnv::new(PendulumSpec::default()).unwrap();
        let mut b = PendulumEnv::new(PendulumSpec::default()).unwrap();
        let sa = a.reset(&mut StreamRng::seed_from_u64(3));
        let sb = b.reset(&mut StreamRng::seed_from_u64(3));
        assert_eq!(sa, sb);
    }

    #[test]
    fn step_after_done_is_rejected() {
        let spec = PendulumSpec { episode_length: 2, ..PendulumSpec::default() };
        let mut env = PendulumEnv::new(spec).unwrap();
        env.reset_to(1.0, 0.0);
        env.step(&[0.5]).unwrap();
        let (s, _) = env.step(&[0.5]).unwrap();
        assert!(s.done && s.truncated);
        assert!(matches!(env.step(&[0.0]), Err(Error::EpisodeDone)));
    }

    #[test]
    fn angle_normalize_wraps() {
        assert!((angle_normalize(3.0 * PI) + PI).abs() < 1e-12);
        assert!((angle_normalize(0.5) - 0.5).abs() < 1e-15);
        assert!((angle_normalize(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }
}
