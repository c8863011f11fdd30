use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::train::{train_seed, write_atomic, write_metrics_csv, write_trace_csv, SeedOutcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub best_step: u64,
    pub best_eval_return: f64,
    /// Final evaluation of the best checkpoint on held-out episodes.
    pub final_mean_return: f64,
    pub final_std_return: f64,
    pub final_fluctuation: f64,
    pub final_lipschitz_k1: f64,
    pub final_lipschitz_k2: f64,
    pub wall_time_secs: f64,
    pub metrics_file: String,
    pub checkpoint_file: String,
    pub trace_file: String,
}

/// Written last, atomically; a run directory without one is incomplete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub code_version: String,
    pub config_hash: String,
    pub env_label: String,
    pub method: String,
    pub config: RunConfig,
    pub seeds: Vec<SeedSummary>,
    /// Every other file in the run directory, relative to it.
    pub files: Vec<String>,
}

fn seed_files(seed: u64) -> (String, String, String) {
    (format!("seed{seed}_metrics.csv"), format!("seed{seed}_best.json"), format!("seed{seed}_trace.csv"))
}

fn persist_seed(dir: &Path, o: &SeedOutcome) -> Result<SeedSummary> {
    let (metrics, ckpt, trace) = seed_files(o.seed);
    write_metrics_csv(&dir.join(&metrics), &o.rows)?;
    let json = serde_json::to_vec_pretty(&o.best)?;
    write_atomic(&dir.join(&ckpt), &json)?;
    write_trace_csv(&dir.join(&trace), &o.final_eval.traces[0])?;
    let e = &o.final_eval;
    Ok(SeedSummary {
        seed: o.seed,
        best_step: o.best.step,
        best_eval_return: o.best.eval_mean_return,
        final_mean_return: e.mean_return,
        final_std_return: e.std_return,
        final_fluctuation: e.fluctuation,
        final_lipschitz_k1: e.lipschitz_k1,
        final_lipschitz_k2: e.lipschitz_k2,
        wall_time_secs: o.wall_time_secs,
        metrics_file: metrics,
        checkpoint_file: ckpt,
        trace_file: trace,
    })
}

/// Trains every seed of `config` (in parallel), then writes per-seed
/// metrics, checkpoints and traces plus the run manifest.
pub fn run_experiment(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let dir = config.run_dir();
    if dir.exists() && std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?.next().is_some() {
        return Err(Error::Config(format!(
            "run id {:?} already used in {}",
            config.run_id,
            config.output_dir.display()
        )));
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let snapshot = config.to_toml()?;
    std::fs::write(dir.join(CONFIG_SNAPSHOT), &snapshot).map_err(|e| Error::io(dir.join(CONFIG_SNAPSHOT), e))?;
    log::info!(
        "run {} ({}) on {}: {} seeds",
        config.run_id,
        config.method_label(),
        config.env.label(),
        config.seeds.len()
    );

    let outcomes: Vec<Result<SeedOutcome>> = config.seeds.par_iter().map(|&s| train_seed(config, s)).collect();
    let mut files = vec![CONFIG_SNAPSHOT.to_string()];
    let mut seeds = Vec::new();
    let mut first_err = None;
    for (seed, outcome) in config.seeds.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                let s = persist_seed(&dir, &o)?;
                files.extend([s.metrics_file.clone(), s.checkpoint_file.clone(), s.trace_file.clone()]);
                log::info!(
                    "seed {seed}: final return {:.3}, fluctuation {:.4}",
                    s.final_mean_return,
                    s.final_fluctuation
                );
                seeds.push(s);
            }
            Err(e) => {
                let name = format!("seed{seed}_abort.txt");
                std::fs::write(dir.join(&name), e.to_string()).map_err(|io| Error::io(dir.join(&name), io))?;
                log::error!("seed {seed} failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        run_id: config.run_id.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        env_label: config.env.label(),
        method: config.method_label(),
        config: config.clone(),
        seeds,
        files,
    };
    write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads and checks a run manifest; every listed file must exist.
pub fn load_manifest(run_dir: &Path) -> Result<RunManifest> {
    let path = run_dir.join(MANIFEST_FILE);
    let bad = |reason: String| Error::Manifest { path: path.clone(), reason };
    let text = std::fs::read_to_string(&path).map_err(|e| bad(format!("{e} (incomplete or missing run)")))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if m.format_version != MANIFEST_VERSION {
        return Err(bad(format!("unsupported version {}", m.format_version)));
    }
    if let Some(f) = m.files.iter().find(|f| !run_dir.join(f).is_file()) {
        return Err(bad(format!("listed file {f} is missing")));
    }
    Ok(m)
}

pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join(MANIFEST_FILE)
}
