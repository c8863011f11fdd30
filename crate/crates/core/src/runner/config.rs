use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::smoothness::RegularizerSpec;

/// Environment variable that replaces `output_dir` when set.
pub const OUTPUT_ROOT_ENV: &str = "SMOOTHLAB_OUTPUT_ROOT";

/// One experiment: an environment, an agent, a regularizer and a seed list.
///
/// ```toml
/// run_id = "cosine-gradcaps"
/// output_dir = "runs"
/// total_steps = 20000
/// seeds = [0, 1, 2]
///
/// [env]
/// type = "wave"
/// wave = "cosine"
///
/// [agent]
/// algorithm = "sac"
///
/// [regularizer]
/// kind = "gradcaps_norm"
/// lambda_t = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    pub total_steps: u64,
    #[serde(default = "d_warmup")]
    pub warmup_steps: u64,
    #[serde(default = "d_eval_interval")]
    pub eval_interval: u64,
    #[serde(default = "d_eval_episodes")]
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub env: EnvSpec,
    pub agent: AgentConfig,
    #[serde(default = "RegularizerSpec::vanilla")]
    pub regularizer: RegularizerSpec,
}

fn d_output() -> PathBuf {
    PathBuf::from("runs")
}
fn d_warmup() -> u64 {
    1000
}
fn d_eval_interval() -> u64 {
    2000
}
fn d_eval_episodes() -> usize {
    10
}

impl RunConfig {
    pub fn new(run_id: impl Into<String>, env: EnvSpec, agent: AgentConfig, regularizer: RegularizerSpec) -> Self {
        Self {
            run_id: run_id.into(),
            output_dir: d_output(),
            total_steps: 20_000,
            warmup_steps: d_warmup(),
            eval_interval: d_eval_interval(),
            eval_episodes: d_eval_episodes(),
            seeds: vec![0],
            env,
            agent,
            regularizer,
        }
    }

    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the output-root override from the environment, if any.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()) {
            self.output_dir = PathBuf::from(root);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.run_id.is_empty()
            || !self.run_id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.run_id.starts_with('.')
        {
            return bad(format!("run_id {:?} must be a nonempty name of [A-Za-z0-9._-]", self.run_id));
        }
        if self.total_steps < self.warmup_steps {
            return bad(format!("total_steps {} is below warmup_steps {}", self.total_steps, self.warmup_steps));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("eval_interval and eval_episodes must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        self.env.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.agent.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.regularizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }

    /// `sac-vanilla`, `td3-gradcaps_norm` and so on.
    pub fn method_label(&self) -> String {
        format!("{}-{}", self.agent.algorithm.label(), self.regularizer.kind.label())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
