//! Single-seed training loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Policy, ReplayBuffer, Transition, UpdateRngs};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EpisodeTrace, Evaluation};
use crate::rng::{stream, Stream};

use super::config::RunConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Best policy found during training plus what is needed to re-evaluate it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub step: u64,
    pub eval_mean_return: f64,
    pub env: EnvSpec,
    pub policy: Policy,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let c: Self = serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("checkpoint: {e}")))?;
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Malformed(format!("unsupported checkpoint version {}", c.format_version)));
        }
        Ok(c)
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub seed: u64,
    pub eval_mean_return: f64,
    pub eval_std: f64,
    pub action_fluctuation: f64,
    pub lipschitz_k1: f64,
    pub lipschitz_k2: f64,
    /// Means over the updates since the previous row; empty before any update.
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub temporal_loss: Option<f64>,
}

/// Everything a finished seed produced, before it is written to disk.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub best: Checkpoint,
    pub final_eval: Evaluation,
    pub wall_time_secs: f64,
}

#[derive(Default)]
struct LossAccumulator {
    actor: (f64, u64),
    critic: (f64, u64),
    temporal: (f64, u64),
}

impl LossAccumulator {
    fn take(&mut self) -> (Option<f64>, Option<f64>, Option<f64>) {
        let mean = |(s, n): (f64, u64)| (n > 0).then(|| s / n as f64);
        let out = (mean(self.actor), mean(self.critic), mean(self.temporal));
        *self = Self::default();
        out
    }
}

fn eval_row(step: u64, seed: u64, e: &Evaluation, losses: (Option<f64>, Option<f64>, Option<f64>)) -> MetricsRow {
    MetricsRow {
        step,
        seed,
        eval_mean_return: e.mean_return,
        eval_std: e.std_return,
        action_fluctuation: e.fluctuation,
        lipschitz_k1: e.lipschitz_k1,
        lipschitz_k2: e.lipschitz_k2,
        actor_loss: losses.0,
        critic_loss: losses.1,
        temporal_loss: losses.2,
    }
}

/// Trains one seed: warm-up with uniform actions, then one update per step,
/// evaluating every `eval_interval` steps and at the end.
pub fn train_seed(config: &RunConfig, seed: u64) -> Result<SeedOutcome> {
    let started = Instant::now();
    let mut env = config.env.build()?;
    let mut eval_env = config.env.build()?;
    let bounds = env.bounds().clone();
    let mut init_rng = stream(seed, Stream::Init);
    let mut env_rng = stream(seed, Stream::Env);
    let mut explore_rng = stream(seed, Stream::Explore);
    let mut sample_rng = stream(seed, Stream::Sample);
    let mut noise_rng = stream(seed, Stream::PolicyNoise);
    let mut spatial_rng = stream(seed, Stream::Spatial);

    let mut agent = Agent::new(env.obs_dim(), bounds.clone(), config.agent.clone(), config.regularizer, &mut init_rng)?;
    let mut buffer = ReplayBuffer::new(config.agent.buffer_capacity);
    let batch_size = config.agent.batch_size;
    let hash = config.hash();

    let mut state = env.reset(&mut env_rng);
    let mut prev_obs: Option<Vec<f64>> = None;
    let mut episode = 0u64;
    let mut losses = LossAccumulator::default();
    let mut rows = Vec::new();
    let mut best: Option<Checkpoint> = None;

    let evaluate_now = |policy: &Policy, env: &mut dyn crate::envs::Environment| {
        evaluate(policy, env, config.eval_episodes, &mut stream(seed, Stream::Eval))
    };

    for step in 1..=config.total_steps {
        let action = if step <= config.warmup_steps {
            (0..bounds.dim()).map(|i| explore_rng.gen_range(bounds.low[i]..=bounds.high[i])).collect()
        } else {
            agent.explore(&state.observation, &mut explore_rng)?
        };
        let (next, reward) = env.step(&action)?;
        buffer.push(Transition {
            s_prev: prev_obs.take(),
            s: state.observation.clone(),
            a: action,
            r: reward,
            s_next: next.observation.clone(),
            done: next.done && !next.truncated,
            episode,
            step: state.step,
        })?;

        if step > config.warmup_steps && buffer.valid_triples() >= batch_size {
            let batch = buffer.sample_triples(batch_size, &mut sample_rng)?;
            let d = agent
                .update(&batch, UpdateRngs { policy_noise: &mut noise_rng, spatial: &mut spatial_rng })
                .map_err(|e| match e {
                    Error::Aborted(msg) => Error::Aborted(format!("seed {seed}, env step {step}: {msg}")),
                    other => other,
                })?;
            losses.critic.0 += d.critic_loss;
            losses.critic.1 += 1;
            if let Some(a) = d.actor {
                losses.actor.0 += a.total;
                losses.actor.1 += 1;
                losses.temporal.0 += a.temporal;
                losses.temporal.1 += 1;
            }
        }

        if next.done {
            state = env.reset(&mut env_rng);
            episode += 1;
        } else {
            prev_obs = Some(std::mem::replace(&mut state, next).observation);
        }

        if step % config.eval_interval == 0 || step == config.total_steps {
            let e = evaluate_now(agent.policy(), eval_env.as_mut())?;
            log::debug!("seed {seed} step {step}: eval {:.3} ± {:.3}", e.mean_return, e.std_return);
            rows.push(eval_row(step, seed, &e, losses.take()));
            if best.as_ref().is_none_or(|b| e.mean_return > b.eval_mean_return) {
                best = Some(Checkpoint {
                    format_version: CHECKPOINT_VERSION,
                    config_hash: hash.clone(),
                    seed,
                    step,
                    eval_mean_return: e.mean_return,
                    env: config.env.clone(),
                    policy: agent.policy().clone(),
                });
            }
        }
    }

    let best = match best {
        Some(b) => b,
        None => {
            // Zero-step run: record the initial policy.
            let e = evaluate_now(agent.policy(), eval_env.as_mut())?;
            rows.push(eval_row(0, seed, &e, (None, None, None)));
            Checkpoint {
                format_version: CHECKPOINT_VERSION,
                config_hash: hash,
                seed,
                step: 0,
                eval_mean_return: e.mean_return,
                env: config.env.clone(),
                policy: agent.policy().clone(),
            }
        }
    };
    let final_eval =
        evaluate(&best.policy, eval_env.as_mut(), config.eval_episodes, &mut stream(seed, Stream::FinalEval))?;
    Ok(SeedOutcome { seed, rows, best, final_eval, wall_time_secs: started.elapsed().as_secs_f64() })
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// `step, reference, action_0.., reward` for one rollout.
pub fn write_trace_csv(path: &Path, trace: &EpisodeTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = trace.actions.first().map_or(0, |a| a.len());
    let mut header = vec!["step".to_string(), "reference".to_string()];
    header.extend((0..dim).map(|i| format!("action_{i}")));
    header.push("reward".into());
    w.write_record(&header)?;
    for (t, (a, r)) in trace.actions.iter().zip(&trace.rewards).enumerate() {
        let mut rec = vec![t.to_string()];
        rec.push(trace.references.as_ref().map(|v| v[t].to_string()).unwrap_or_default());
        rec.extend(a.iter().map(|v| v.to_string()));
        rec.push(r.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
