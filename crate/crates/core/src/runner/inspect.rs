//! Smoothness losses of user-supplied scalar action sequences.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothness::{actions_from_scalars, sequence_loss, Aggregation, SequenceTerm};

/// Which normalized Grad-CAPS form to report next to the raw losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectMode {
    /// `‖raw ⊘ (δ + ε)‖`, with ε defaulting to 0.
    Division,
    /// `raw · tanh(‖1 ⊘ (|δ| + ε)‖)`, with ε defaulting to 1e-3.
    Tanh,
    All,
}

impl std::str::FromStr for InspectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "division" | "div" => Ok(InspectMode::Division),
            "tanh" => Ok(InspectMode::Tanh),
            "all" => Ok(InspectMode::All),
            other => Err(Error::Config(format!("unknown mode {other:?} (division, tanh, all)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InspectOptions {
    pub mode: InspectMode,
    /// Overrides the per-form default ε.
    pub epsilon: Option<f64>,
    pub aggregation: Aggregation,
}

impl InspectOptions {
    pub fn new(mode: InspectMode) -> Self {
        Self { mode, epsilon: None, aggregation: Aggregation::SqrtSumSq }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    /// One-based row number in the input.
    pub row: usize,
    pub caps: f64,
    pub gradcaps_raw: f64,
    pub gradcaps_div: Option<f64>,
    pub gradcaps_tanh: Option<f64>,
}

/// Parses one numeric sequence per line. Blank lines and `#` comments are skipped.
pub fn parse_sequences(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let values = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Malformed(format!("line {line}: {f:?} is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            continue;
        }
        if values.len() < 3 {
            return Err(Error::Malformed(format!("line {line}: need at least 3 actions, got {}", values.len())));
        }
        out.push(values);
    }
    if out.is_empty() {
        return Err(Error::Malformed("no sequences in input".into()));
    }
    Ok(out)
}

pub fn loss_inspect(text: &str, opts: &InspectOptions) -> Result<Vec<LossRow>> {
    let div = matches!(opts.mode, InspectMode::Division | InspectMode::All);
    let tanh = matches!(opts.mode, InspectMode::Tanh | InspectMode::All);
    let agg = opts.aggregation;
    parse_sequences(text)?
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let a = actions_from_scalars(seq);
            Ok(LossRow {
                row: i + 1,
                caps: sequence_loss(&a, SequenceTerm::Caps, agg)?,
                gradcaps_raw: sequence_loss(&a, SequenceTerm::GradcapsRaw, agg)?,
                gradcaps_div: div
                    .then(|| {
                        sequence_loss(&a, SequenceTerm::GradcapsDivision { eps: opts.epsilon.unwrap_or(0.0) }, agg)
                    })
                    .transpose()?,
                gradcaps_tanh: tanh
                    .then(|| sequence_loss(&a, SequenceTerm::GradcapsNorm { eps: opts.epsilon.unwrap_or(1e-3) }, agg))
                    .transpose()?,
            })
        })
        .collect()
}

/// CSV text with only the columns the mode produced.
pub fn format_inspect_csv(rows: &[LossRow]) -> String {
    let div = rows.iter().any(|r| r.gradcaps_div.is_some());
    let tanh = rows.iter().any(|r| r.gradcaps_tanh.is_some());
    let mut s = String::from("row,caps,gradcaps_raw");
    if div {
        s.push_str(",gradcaps_div");
    }
    if tanh {
        s.push_str(",gradcaps_tanh");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{}", r.row, r.caps, r.gradcaps_raw);
        for v in [div.then_some(r.gradcaps_div), tanh.then_some(r.gradcaps_tanh)].into_iter().flatten() {
            let _ = write!(s, ",{}", v.expect("column present for every row"));
        }
        s.push('\n');
    }
    s
}
