//! Evaluation: returns, action fluctuation and rollout traces.

use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::smoothness::{caps_temporal_loss, estimate_lipschitz, ActionVector, LipschitzOrder};

/// One deterministic rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub actions: Vec<ActionVector>,
    pub rewards: Vec<f64>,
    /// Reference value each action was aiming at, for tracking tasks.
    pub references: Option<Vec<f64>>,
    #[serde(rename = "return")]
    pub return_: f64,
    pub length: usize,
}

impl EpisodeTrace {
    /// Builds a trace, checking lengths and deriving the return.
    pub fn new(actions: Vec<ActionVector>, rewards: Vec<f64>, references: Option<Vec<f64>>) -> Result<Self> {
        if actions.len() != rewards.len() {
            return Err(Error::DimMismatch { expected: actions.len(), got: rewards.len() });
        }
        if let Some(r) = &references {
            if r.len() != actions.len() {
                return Err(Error::DimMismatch { expected: actions.len(), got: r.len() });
            }
        }
        let return_ = rewards.iter().sum();
        let length = actions.len();
        Ok(Self { actions, rewards, references, return_, length })
    }
}

/// Mean over `t` of `‖a_t − a_{t−1}‖₂`.
pub fn action_fluctuation(actions: &[ActionVector]) -> Result<f64> {
    if actions.len() < 2 {
        return Err(Error::SequenceTooShort { need: 2, got: actions.len() });
    }
    let mut sum = 0.0;
    for w in actions.windows(2) {
        sum += caps_temporal_loss(&w[1], &w[0])?;
    }
    Ok(sum / (actions.len() - 1) as f64)
}

/// Full rollout of the deterministic action path from a fresh reset.
pub fn record_trace(policy: &Policy, env: &mut dyn Environment, rng: &mut StreamRng) -> Result<EpisodeTrace> {
    let mut state = env.reset(rng);
    let tracking = env.reference().is_some();
    let (mut actions, mut rewards, mut refs) = (Vec::new(), Vec::new(), Vec::new());
    while !state.done {
        let a = policy.deterministic_action(&state.observation)?;
        let (next, r) = env.step(&a)?;
        if let Some(v) = env.reference() {
            refs.push(v);
        }
        actions.push(a);
        rewards.push(r);
        state = next;
    }
    EpisodeTrace::new(actions, rewards, tracking.then_some(refs))
}

/// Sample mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Mean and sample std of undiscounted returns over `n_episodes` rollouts.
pub fn average_reward(
    policy: &Policy,
    env: &mut dyn Environment,
    n_episodes: usize,
    rng: &mut StreamRng,
) -> Result<(f64, f64)> {
    let e = evaluate(policy, env, n_episodes, rng)?;
    Ok((e.mean_return, e.std_return))
}

/// Everything one evaluation round measures.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub mean_return: f64,
    pub std_return: f64,
    /// Per-episode fluctuation averaged over episodes.
    pub fluctuation: f64,
    pub lipschitz_k1: f64,
    pub lipschitz_k2: f64,
    pub traces: Vec<EpisodeTrace>,
}

pub fn evaluate(
    policy: &Policy,
    env: &mut dyn Environment,
    n_episodes: usize,
    rng: &mut StreamRng,
) -> Result<Evaluation> {
    if n_episodes == 0 {
        return Err(Error::InvalidParameter("need at least one evaluation episode".into()));
    }
    let traces = (0..n_episodes).map(|_| record_trace(policy, env, rng)).collect::<Result<Vec<_>>>()?;
    let returns: Vec<f64> = traces.iter().map(|t| t.return_).collect();
    let (mean_return, std_return) = mean_std(&returns);
    let per = |f: &dyn Fn(&EpisodeTrace) -> Result<f64>| -> Result<f64> {
        let v = traces.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    };
    let fluctuation = per(&|t| action_fluctuation(&t.actions))?;
    let lipschitz_k1 = per(&|t| estimate_lipschitz(&t.actions, LipschitzOrder::First))?;
    let lipschitz_k2 = per(&|t| {
        if t.actions.len() < 3 {
            Ok(0.0)
        } else {
            estimate_lipschitz(&t.actions, LipschitzOrder::Second)
        }
    })?;
    Ok(Evaluation { mean_return, std_return, fluctuation, lipschitz_k1, lipschitz_k2, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::PolicyKind;
    use crate::envs::{waveform_value, EnvSpec, WaveEnv, WaveKind, WaveSpec};
    use crate::rng::{stream, Stream};
    use crate::smoothness::{actions_from_scalars, ActionBounds};
    use proptest::prelude::*;

    fn zero_policy(obs_dim: usize) -> Policy {
        let mut p = Policy::new(
            obs_dim,
            &[8],
            PolicyKind::Gaussian,
            ActionBounds::symmetric(1, 2.0).unwrap(),
            &mut stream(0, Stream::Init),
        )
        .unwrap();
        let zeros = vec![0.0; p.net.param_count()];
        p.net.set_flat_params(&zeros).unwrap();
        p
    }

    fn random_policy(seed: u64) -> Policy {
        Policy::new(
            2,
            &[16],
            PolicyKind::Deterministic,
            ActionBounds::symmetric(1, 2.0).unwrap(),
            &mut stream(seed, Stream::Init),
        )
        .unwrap()
    }

    #[test]
    fn fluctuation_examples() {
        assert_eq!(action_fluctuation(&actions_from_scalars(&[0.5; 5])).unwrap(), 0.0);
        assert_eq!(action_fluctuation(&actions_from_scalars(&[1.0, -1.0, 1.0, -1.0])).unwrap(), 2.0);
        assert_eq!(action_fluctuation(&actions_from_scalars(&[0.0, 2.0, 4.0, 6.0])).unwrap(), 2.0);
        assert!(matches!(action_fluctuation(&actions_from_scalars(&[1.0])), Err(Error::SequenceTooShort { .. })));
    }

    #[test]
    fn scripted_perfect_agent_scores_zero() {
        let spec = WaveSpec::new(WaveKind::Square);
        let mut env = WaveEnv::new(spec.clone()).unwrap();
        let mut rng = stream(1, Stream::Eval);
        let mut returns = Vec::new();
        for _ in 0..3 {
            let mut s = env.reset(&mut rng);
            let mut ret = 0.0;
            while !s.done {
                let (n, r) = env.step(&[waveform_value(&spec, s.step + 1)]).unwrap();
                ret += r;
                s = n;
            }
            returns.push(ret);
        }
        assert_eq!(mean_std(&returns), (0.0, 0.0));
    }

    #[test]
    fn zero_agent_on_square_wave() {
        let p = zero_policy(2);
        let mut env = EnvSpec::Wave(WaveSpec::new(WaveKind::Square)).build().unwrap();
        let (mean, std) = average_reward(&p, env.as_mut(), 3, &mut stream(2, Stream::Eval)).unwrap();
        assert_eq!(mean, -200.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn deterministic_policy_has_zero_variance() {
        let p = random_policy(3);
        let mut env = EnvSpec::Wave(WaveSpec::new(WaveKind::Cosine)).build().unwrap();
        let (_, std) = average_reward(&p, env.as_mut(), 4, &mut stream(3, Stream::Eval)).unwrap();
        assert_eq!(std, 0.0);
    }

    #[test]
    fn trace_shape_and_consistency() {
        let p = random_policy(4);
        let mut env = EnvSpec::Wave(WaveSpec::new(WaveKind::Square)).build().unwrap();
        let t1 = record_trace(&p, env.as_mut(), &mut stream(5, Stream::Eval)).unwrap();
        let t2 = record_trace(&p, env.as_mut(), &mut stream(5, Stream::Eval)).unwrap();
        assert_eq!(t1.length, 200);
        assert_eq!(t1.references.as_ref().unwrap().len(), 200);
        assert_eq!(t1, t2);
        let (mean, _) = average_reward(&p, env.as_mut(), 1, &mut stream(5, Stream::Eval)).unwrap();
        assert_eq!(mean, t1.return_);
        assert_eq!(t1.return_, t1.rewards.iter().sum::<f64>());
    }

    #[test]
    fn trace_rejects_mismatched_lengths() {
        assert!(EpisodeTrace::new(actions_from_scalars(&[0.0, 1.0]), vec![0.0], None).is_err());
    }

    proptest! {
        #[test]
        fn fluctuation_shift_and_scale(
            xs in prop::collection::vec(-5.0f64..5.0, 2..30),
            shift in -3.0f64..3.0,
            c in -4.0f64..4.0,
        ) {
            let base = action_fluctuation(&actions_from_scalars(&xs)).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let fs = action_fluctuation(&actions_from_scalars(&shifted)).unwrap();
            let fc = action_fluctuation(&actions_from_scalars(&scaled)).unwrap();
            prop_assert!((fs - base).abs() <= 1e-9 * (1.0 + base));
            prop_assert!((fc - c.abs() * base).abs() <= 1e-9 * (1.0 + base.abs() * c.abs()));
        }

        #[test]
        fn fluctuation_bounded_by_first_order_lipschitz(xs in prop::collection::vec(-5.0f64..5.0, 2..30)) {
            let a = actions_from_scalars(&xs);
            prop_assert!(action_fluctuation(&a).unwrap() <= estimate_lipschitz(&a, LipschitzOrder::First).unwrap() + 1e-12);
        }
    }
}
