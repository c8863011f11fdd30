//! Comparison tables and trajectory overlays across finished runs.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mean_std;

use super::experiment::{load_manifest, RunManifest};

/// One method's results pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub run_id: String,
    pub method: String,
    pub lambda_t: f64,
    pub seeds: usize,
    pub mean_return: f64,
    /// Sample std of per-seed final returns.
    pub std_return: f64,
    pub fluctuation: f64,
    pub fluctuation_std: f64,
}

pub fn summarize(m: &RunManifest) -> MethodSummary {
    let returns: Vec<f64> = m.seeds.iter().map(|s| s.final_mean_return).collect();
    let flucts: Vec<f64> = m.seeds.iter().map(|s| s.final_fluctuation).collect();
    let (mean_return, std_return) = mean_std(&returns);
    let (fluctuation, fluctuation_std) = mean_std(&flucts);
    MethodSummary {
        run_id: m.run_id.clone(),
        method: m.method.clone(),
        lambda_t: m.config.regularizer.lambda_t,
        seeds: m.seeds.len(),
        mean_return,
        std_return,
        fluctuation,
        fluctuation_std,
    }
}

/// First-seed evaluation rollout: `(step, reference, first action component)`.
pub(crate) fn read_trace(path: &Path) -> Result<Vec<(usize, Option<f64>, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Malformed(format!("{}: short trace row", path.display())))?
                .parse::<f64>()
                .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
        };
        let step = num(0)? as usize;
        let reference = rec.get(1).filter(|s| !s.is_empty()).map(|_| num(1)).transpose()?;
        out.push((step, reference, num(2)?));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<MethodSummary>,
    pub files: Vec<PathBuf>,
}

pub fn load_comparable(run_dirs: &[PathBuf]) -> Result<Vec<RunManifest>> {
    if run_dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let manifests = run_dirs.iter().map(|d| load_manifest(d)).collect::<Result<Vec<_>>>()?;
    let env = &manifests[0].config.env;
    if let Some(other) = manifests.iter().find(|m| &m.config.env != env) {
        return Err(Error::Incomparable(format!(
            "run {} uses {} but run {} uses {}",
            manifests[0].run_id, manifests[0].env_label, other.run_id, other.env_label
        )));
    }
    Ok(manifests)
}

/// Writes `comparison.csv`, `overlay.csv` and `overlay.svg` into `out_dir`.
pub fn emit_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Report> {
    let manifests = load_comparable(run_dirs)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows: Vec<MethodSummary> = manifests.iter().map(summarize).collect();

    let table = out_dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&table)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&table, e))?;

    let mut series = Vec::new();
    for (m, dir) in manifests.iter().zip(run_dirs) {
        let first = &m.seeds[0];
        series.push((m.run_id.clone(), read_trace(&dir.join(&first.trace_file))?));
    }
    let overlay = out_dir.join("overlay.csv");
    let mut w = csv::Writer::from_path(&overlay)?;
    w.write_record(["run_id", "step", "reference", "action"])?;
    for (name, points) in &series {
        for (step, reference, action) in points {
            w.write_record([
                name.clone(),
                step.to_string(),
                reference.map(|v| v.to_string()).unwrap_or_default(),
                action.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&overlay, e))?;

    let svg = out_dir.join("overlay.svg");
    let reference: Vec<(f64, f64)> = series[0].1.iter().filter_map(|(t, r, _)| r.map(|v| (*t as f64, v))).collect();
    let mut lines = Vec::new();
    if !reference.is_empty() {
        lines.push(("reference".to_string(), reference));
    }
    for (name, points) in &series {
        lines.push((name.clone(), points.iter().map(|(t, _, a)| (*t as f64, *a)).collect()));
    }
    std::fs::write(&svg, svg_polylines(&format!("{} rollouts", manifests[0].env_label), &lines))
        .map_err(|e| Error::io(&svg, e))?;
    Ok(Report { rows, files: vec![table, overlay, svg] })
}

const PALETTE: [&str; 8] = ["#000000", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"];

/// Minimal line chart: one polyline per series plus a legend.
pub fn svg_polylines(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (800.0, 320.0, 40.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = (w - 2.0 * pad) / (x1 - x0).max(1e-12);
    let sy = (h - 2.0 * pad) / (y1 - y0).max(1e-12);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> =
            points.iter().map(|(x, y)| format!("{:.2},{:.2}", pad + (x - x0) * sx, h - pad - (y - y0) * sy)).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - 190.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
