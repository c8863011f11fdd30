//! λ_t ablation over CAPS and Grad-CAPS.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothness::RegularizerKind;

use super::config::RunConfig;
use super::experiment::run_experiment;
use super::report::{read_trace, summarize};
use super::train::write_atomic;

pub const DEFAULT_GRID: [&str; 6] = ["0.05", "0.1", "0.5", "1.0", "2.0", "3.0"];

/// λ values as typed, so output headers can echo them verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub raw: Vec<String>,
    pub values: Vec<f64>,
}

impl LambdaGrid {
    /// Accepts separate tokens and/or comma-separated lists.
    pub fn parse<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        let raw: Vec<String> = tokens
            .iter()
            .flat_map(|t| {
                t.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect::<Vec<_>>()
            })
            .collect();
        if raw.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        let values = raw
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::Config(format!("bad lambda {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { raw, values })
    }

    pub fn default_grid() -> Self {
        Self::parse(&DEFAULT_GRID).expect("default grid parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kind: RegularizerKind,
    pub lambda: String,
    pub run_id: String,
    pub mean_return: f64,
    pub std_return: f64,
    pub fluctuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: LambdaGrid,
    pub points: Vec<SweepPoint>,
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub runs: Vec<String>,
}

impl SweepReport {
    pub fn point(&self, kind: RegularizerKind, lambda: &str) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.kind == kind && p.lambda == lambda)
    }
}

pub const SWEEP_KINDS: [RegularizerKind; 2] = [RegularizerKind::Caps, RegularizerKind::GradcapsNorm];

/// Runs one experiment per (kind, λ) under `<output_dir>/<run_id>/` and writes
/// `sweep.csv`, stacked traces and a sweep manifest there.
pub fn ablate_lambda(config: &RunConfig, grid: &LambdaGrid, kinds: &[RegularizerKind]) -> Result<SweepReport> {
    config.validate()?;
    if kinds.is_empty() {
        return Err(Error::Config("no regularizer kinds to sweep".into()));
    }
    let dir = config.run_dir();
    if dir.exists() && std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?.next().is_some() {
        return Err(Error::Config(format!("sweep id {:?} already used", config.run_id)));
    }
    let mut points = Vec::new();
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    for &kind in kinds {
        for (raw, &lambda) in grid.raw.iter().zip(&grid.values) {
            let mut c = config.clone();
            c.output_dir = dir.clone();
            c.run_id = format!("{}-lam{raw}", kind.label());
            c.regularizer.kind = kind;
            c.regularizer.lambda_t = lambda;
            let m = run_experiment(&c)?;
            let s = summarize(&m);
            traces.push((kind, raw.clone(), read_trace(&c.run_dir().join(&m.seeds[0].trace_file))?));
            points.push(SweepPoint {
                kind,
                lambda: raw.clone(),
                run_id: m.run_id.clone(),
                mean_return: s.mean_return,
                std_return: s.std_return,
                fluctuation: s.fluctuation,
            });
            runs.push(m.run_id);
        }
    }

    let header = format!("# lambda_grid: {}\n", grid.raw.join(","));
    let mut table = header.clone();
    table.push_str("kind,lambda,run_id,mean_return,std_return,fluctuation\n");
    for p in &points {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.kind.label(),
            p.lambda,
            p.run_id,
            p.mean_return,
            p.std_return,
            p.fluctuation
        ));
    }
    write_atomic(&dir.join("sweep.csv"), table.as_bytes())?;

    let mut stacked = header;
    stacked.push_str("kind,lambda,step,reference,action\n");
    for (kind, raw, points) in &traces {
        for (step, reference, action) in points {
            stacked.push_str(&format!(
                "{},{raw},{step},{},{action}\n",
                kind.label(),
                reference.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
    }
    write_atomic(&dir.join("sweep_traces.csv"), stacked.as_bytes())?;

    let report = SweepReport {
        grid: grid.clone(),
        points,
        dir: dir.clone(),
        files: vec!["sweep.csv".into(), "sweep_traces.csv".into()],
        runs,
    };
    write_atomic(&dir.join("sweep_manifest.json"), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}
