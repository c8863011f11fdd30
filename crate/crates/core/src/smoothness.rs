//! Action-smoothness penalties.
//!
//! * CAPS temporal: `‖a_t − a_{t+1}‖₂`, and CAPS spatial `‖π(s) − π(s′)‖₂`
//!   with `s′ = s + N(0, σ²I)`.
//! * Grad-CAPS raw: `‖Δa_t − Δa_{t+1}‖₂` where `Δa_t = a_t − a_{t−1}`.
//! * Grad-CAPS normalized: the raw term weighted by
//!   `tanh(‖1 ⊘ (|δ_t| + ε)‖₂)` with displacement `δ_t = a_{t+1} − a_{t−1}`.
//!   The absolute value keeps every denominator positive.
//! * A literal division diagnostic `‖(Δa_t − Δa_{t+1}) ⊘ (δ_t + ε)‖₂` with a
//!   signed denominator, used for loss inspection only.
//!
//! Every per-step term comes with its gradient with respect to the actions
//! involved. At the kink of the Euclidean norm (zero numerator) the gradient
//! is taken to be zero.

use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("action vector needs at least one component".into()));
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action vector".into()));
        }
        Ok(Self(components))
    }

    pub fn scalar(v: f64) -> Self {
        Self(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Componentwise clamp into `bounds`.
    pub fn clipped(&self, bounds: &ActionBounds) -> Self {
        Self(self.0.iter().zip(bounds.low.iter().zip(&bounds.high)).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect())
    }
}

impl Deref for ActionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<f64> for ActionVector {
    fn from(v: f64) -> Self {
        Self::scalar(v)
    }
}

/// Per-component closed interval `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(Error::InvalidParameter("action bounds need matching nonempty low/high".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidParameter("action bounds must satisfy low < high".into()));
        }
        Ok(Self { low, high })
    }

    pub fn symmetric(dim: usize, limit: f64) -> Result<Self> {
        Self::new(vec![-limit; dim], vec![limit; dim])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.low[i] + self.high[i])
    }

    pub fn half_range(&self, i: usize) -> f64 {
        0.5 * (self.high[i] - self.low[i])
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().enumerate().all(|(i, v)| *v >= self.low[i] && *v <= self.high[i])
    }
}

/// `Δa_t = a_t − a_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDelta(Vec<f64>);

impl ActionDelta {
    pub fn between(prev: &[f64], cur: &[f64]) -> Self {
        Self(cur.iter().zip(prev).map(|(c, p)| c - p).collect())
    }
}

impl Deref for ActionDelta {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `δ_t = a_{t+1} − a_{t−1}`, the net movement across a three-point window.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement(Vec<f64>);

impl Displacement {
    pub fn around(prev: &[f64], next: &[f64]) -> Self {
        Self(next.iter().zip(prev).map(|(n, p)| n - p).collect())
    }
}

impl Deref for Displacement {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    #[default]
    None,
    Caps,
    GradcapsRaw,
    GradcapsNorm,
}

impl RegularizerKind {
    pub fn label(self) -> &'static str {
        match self {
            RegularizerKind::None => "vanilla",
            RegularizerKind::Caps => "caps",
            RegularizerKind::GradcapsRaw => "gradcaps_raw",
            RegularizerKind::GradcapsNorm => "gradcaps_norm",
        }
    }

    pub fn needs_prev_state(self) -> bool {
        matches!(self, RegularizerKind::GradcapsRaw | RegularizerKind::GradcapsNorm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    SqrtSumSq,
}

impl Aggregation {
    pub fn combine(self, steps: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => steps.iter().sum::<f64>() / steps.len() as f64,
            Aggregation::SqrtSumSq => steps.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Which smoothness terms enter the actor objective, and how strongly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    #[serde(default = "default_lambda_t")]
    pub lambda_t: f64,
    #[serde(default)]
    pub lambda_s: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_spatial_sigma")]
    pub spatial_sigma: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
}

fn default_lambda_t() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_spatial_sigma() -> f64 {
    0.05
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self::vanilla()
    }
}

impl RegularizerSpec {
    pub fn vanilla() -> Self {
        Self {
            kind: RegularizerKind::None,
            lambda_t: 0.0,
            lambda_s: 0.0,
            epsilon: default_epsilon(),
            spatial_sigma: default_spatial_sigma(),
            aggregation: Aggregation::Mean,
        }
    }

    pub fn with_kind(kind: RegularizerKind, lambda_t: f64) -> Self {
        Self { kind, lambda_t, ..Self::vanilla() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.lambda_t >= 0.0)
            || !(self.lambda_s >= 0.0)
            || !self.lambda_t.is_finite()
            || !self.lambda_s.is_finite()
        {
            return Err(Error::InvalidParameter("regularizer weights must be finite and nonnegative".into()));
        }
        if !(self.spatial_sigma >= 0.0) {
            return Err(Error::InvalidParameter("spatial_sigma must be nonnegative".into()));
        }
        if self.lambda_s > 0.0 && self.spatial_sigma <= 0.0 {
            return Err(Error::InvalidParameter("lambda_s > 0 requires spatial_sigma > 0".into()));
        }
        Ok(())
    }

    /// Temporal term active with nonzero weight.
    pub fn temporal_active(&self) -> bool {
        self.kind != RegularizerKind::None && self.lambda_t > 0.0
    }

    pub fn spatial_active(&self) -> bool {
        self.lambda_s > 0.0
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    let d = dims[0];
    if d == 0 {
        return Err(Error::InvalidParameter("actions must have at least one component".into()));
    }
    for &o in &dims[1..] {
        if o != d {
            return Err(Error::DimMismatch { expected: d, got: o });
        }
    }
    Ok(d)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")))
    }
}

/// CAPS temporal term `‖a_t − a_next‖₂`.
pub fn caps_temporal_loss(a_t: &[f64], a_next: &[f64]) -> Result<f64> {
    check_dims(&[a_t.len(), a_next.len()])?;
    Ok(norm(&ActionDelta::between(a_t, a_next)))
}

/// CAPS spatial term against an explicit state perturbation.
pub fn caps_spatial_loss_with_noise<F>(policy: F, state: &[f64], noise: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<ActionVector>,
{
    check_dims(&[state.len(), noise.len()])?;
    let perturbed: Vec<f64> = state.iter().zip(noise).map(|(s, n)| s + n).collect();
    let a = policy(state)?;
    let b = policy(&perturbed)?;
    caps_temporal_loss(&a, &b)
}

/// CAPS spatial term with `s′ = s + N(0, σ²I)`. `σ = 0` means `s′ = s`.
pub fn caps_spatial_loss<F, R>(policy: F, state: &[f64], sigma: f64, rng: &mut R) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<ActionVector>,
    R: Rng + ?Sized,
{
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("spatial sigma must be nonnegative, got {sigma}")));
    }
    let noise: Vec<f64> = if sigma == 0.0 {
        vec![0.0; state.len()]
    } else {
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        state.iter().map(|_| normal.sample(rng)).collect()
    };
    caps_spatial_loss_with_noise(policy, state, &noise)
}

/// Second difference `Δa_t − Δa_{t+1} = 2a_t − a_prev − a_next`.
fn second_difference(a_prev: &[f64], a_t: &[f64], a_next: &[f64]) -> Vec<f64> {
    let before = ActionDelta::between(a_prev, a_t);
    let after = ActionDelta::between(a_t, a_next);
    before.iter().zip(after.iter()).map(|(b, a)| b - a).collect()
}

/// Grad-CAPS raw term `‖(a_t − a_prev) − (a_next − a_t)‖₂`.
pub fn gradcaps_raw_loss(a_prev: &[f64], a_t: &[f64], a_next: &[f64]) -> Result<f64> {
    check_dims(&[a_prev.len(), a_t.len(), a_next.len()])?;
    Ok(norm(&second_difference(a_prev, a_t, a_next)))
}

/// `tanh(‖1 ⊘ (|δ| + ε)‖₂)`, in `(0, 1]`: the exact value is below 1 but
/// rounds to 1.0 once the norm passes about 19.
pub fn displacement_weight(delta: &Displacement, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(norm(&reciprocal(delta, eps)).tanh())
}

fn reciprocal(delta: &[f64], eps: f64) -> Vec<f64> {
    delta.iter().map(|d| 1.0 / (d.abs() + eps)).collect()
}

/// Grad-CAPS with displacement normalization:
/// `‖Δa_t − Δa_{t+1}‖₂ · tanh(‖1 ⊘ (|δ_t| + ε)‖₂)`.
pub fn gradcaps_normalized_loss(a_prev: &[f64], a_t: &[f64], a_next: &[f64], eps: f64) -> Result<f64> {
    check_dims(&[a_prev.len(), a_t.len(), a_next.len()])?;
    check_eps(eps)?;
    let raw = norm(&second_difference(a_prev, a_t, a_next));
    Ok(raw * displacement_weight(&Displacement::around(a_prev, a_next), eps)?)
}

/// Diagnostic division form `‖(Δa_t − Δa_{t+1}) ⊘ (δ_t + ε)‖₂` with a signed
/// denominator. `eps` may be zero. A zero denominator makes its component
/// infinite unless the matching numerator is also zero, in which case the
/// component contributes nothing.
pub fn gradcaps_division_loss(a_prev: &[f64], a_t: &[f64], a_next: &[f64], eps: f64) -> Result<f64> {
    check_dims(&[a_prev.len(), a_t.len(), a_next.len()])?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("division epsilon must be nonnegative, got {eps}")));
    }
    let num = second_difference(a_prev, a_t, a_next);
    let delta = Displacement::around(a_prev, a_next);
    let ratio: Vec<f64> = num
        .iter()
        .zip(delta.iter())
        .map(|(n, d)| {
            let den = d + eps;
            if den == 0.0 {
                if *n == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                n / den
            }
        })
        .collect();
    Ok(norm(&ratio))
}

/// Per-step term value and its gradient with respect to each stencil point.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGrad {
    pub loss: f64,
    pub d_prev: Vec<f64>,
    pub d_t: Vec<f64>,
    pub d_next: Vec<f64>,
}

/// CAPS temporal term with gradients; `d_prev` is all zeros.
pub fn caps_temporal_grad(a_t: &[f64], a_next: &[f64]) -> Result<TermGrad> {
    let d = check_dims(&[a_t.len(), a_next.len()])?;
    let diff: Vec<f64> = a_t.iter().zip(a_next).map(|(a, b)| a - b).collect();
    let loss = norm(&diff);
    let unit: Vec<f64> = if loss > 0.0 { diff.iter().map(|v| v / loss).collect() } else { vec![0.0; d] };
    Ok(TermGrad { loss, d_prev: vec![0.0; d], d_next: unit.iter().map(|v| -v).collect(), d_t: unit })
}

/// Grad-CAPS raw term with gradients.
pub fn gradcaps_raw_grad(a_prev: &[f64], a_t: &[f64], a_next: &[f64]) -> Result<TermGrad> {
    let d = check_dims(&[a_prev.len(), a_t.len(), a_next.len()])?;
    let r = second_difference(a_prev, a_t, a_next);
    let loss = norm(&r);
    let unit: Vec<f64> = if loss > 0.0 { r.iter().map(|v| v / loss).collect() } else { vec![0.0; d] };
    Ok(TermGrad {
        loss,
        d_prev: unit.iter().map(|u| -u).collect(),
        d_t: unit.iter().map(|u| 2.0 * u).collect(),
        d_next: unit.iter().map(|u| -u).collect(),
    })
}

/// Normalized Grad-CAPS term with gradients through both the numerator and
/// the displacement weight. `sign(0)` is taken as zero in `d|δ|/dδ`.
pub fn gradcaps_normalized_grad(a_prev: &[f64], a_t: &[f64], a_next: &[f64], eps: f64) -> Result<TermGrad> {
    let d = check_dims(&[a_prev.len(), a_t.len(), a_next.len()])?;
    check_eps(eps)?;
    let r = second_difference(a_prev, a_t, a_next);
    let raw = norm(&r);
    let delta = Displacement::around(a_prev, a_next);
    let w = reciprocal(&delta, eps);
    let n = norm(&w);
    let th = n.tanh();
    let loss = raw * th;
    if raw == 0.0 {
        return Ok(TermGrad { loss, d_prev: vec![0.0; d], d_t: vec![0.0; d], d_next: vec![0.0; d] });
    }
    // d tanh(n)/dδ_i = (1 − tanh²n)·(w_i/n)·(−sign(δ_i)·w_i²)
    let sech2 = 1.0 - th * th;
    let d_delta: Vec<f64> = delta
        .iter()
        .zip(&w)
        .map(|(dl, wi)| {
            let sign = if *dl > 0.0 {
                1.0
            } else if *dl < 0.0 {
                -1.0
            } else {
                0.0
            };
            raw * sech2 * (wi / n) * (-sign * wi * wi)
        })
        .collect();
    let unit: Vec<f64> = r.iter().map(|v| v / raw).collect();
    Ok(TermGrad {
        loss,
        d_prev: unit.iter().zip(&d_delta).map(|(u, g)| -u * th - g).collect(),
        d_t: unit.iter().map(|u| 2.0 * u * th).collect(),
        d_next: unit.iter().zip(&d_delta).map(|(u, g)| -u * th + g).collect(),
    })
}

/// Evaluates the temporal term of `kind` on a stencil. CAPS ignores `a_prev`.
pub fn temporal_term_grad(
    kind: RegularizerKind,
    a_prev: &[f64],
    a_t: &[f64],
    a_next: &[f64],
    eps: f64,
) -> Result<TermGrad> {
    match kind {
        RegularizerKind::None => {
            let d = check_dims(&[a_t.len(), a_next.len()])?;
            Ok(TermGrad { loss: 0.0, d_prev: vec![0.0; d], d_t: vec![0.0; d], d_next: vec![0.0; d] })
        }
        RegularizerKind::Caps => caps_temporal_grad(a_t, a_next),
        RegularizerKind::GradcapsRaw => gradcaps_raw_grad(a_prev, a_t, a_next),
        RegularizerKind::GradcapsNorm => gradcaps_normalized_grad(a_prev, a_t, a_next, eps),
    }
}

/// Per-step loss used by [`sequence_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceTerm {
    Caps,
    GradcapsRaw,
    GradcapsNorm { eps: f64 },
    GradcapsDivision { eps: f64 },
}

impl SequenceTerm {
    fn min_len(self) -> usize {
        match self {
            SequenceTerm::Caps => 2,
            _ => 3,
        }
    }
}

/// Per-step losses over a whole action sequence.
pub fn sequence_steps(actions: &[ActionVector], term: SequenceTerm) -> Result<Vec<f64>> {
    if actions.len() < term.min_len() {
        return Err(Error::SequenceTooShort { need: term.min_len(), got: actions.len() });
    }
    match term {
        SequenceTerm::Caps => actions.windows(2).map(|w| caps_temporal_loss(&w[0], &w[1])).collect(),
        SequenceTerm::GradcapsRaw => actions.windows(3).map(|w| gradcaps_raw_loss(&w[0], &w[1], &w[2])).collect(),
        SequenceTerm::GradcapsNorm { eps } => {
            actions.windows(3).map(|w| gradcaps_normalized_loss(&w[0], &w[1], &w[2], eps)).collect()
        }
        SequenceTerm::GradcapsDivision { eps } => {
            actions.windows(3).map(|w| gradcaps_division_loss(&w[0], &w[1], &w[2], eps)).collect()
        }
    }
}

/// Aggregated loss over a sequence.
pub fn sequence_loss(actions: &[ActionVector], term: SequenceTerm, aggregation: Aggregation) -> Result<f64> {
    Ok(aggregation.combine(&sequence_steps(actions, term)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzOrder {
    /// Bound on `‖a_t − a_{t+1}‖₂`.
    First,
    /// Bound on `‖(a_t − a_{t−1}) − (a_{t+1} − a_t)‖₂`.
    Second,
}

/// Empirical constant: the largest step quantity along the trace. Consecutive
/// states are one step apart, so no division is needed.
pub fn estimate_lipschitz(actions: &[ActionVector], order: LipschitzOrder) -> Result<f64> {
    let term = match order {
        LipschitzOrder::First => SequenceTerm::Caps,
        LipschitzOrder::Second => SequenceTerm::GradcapsRaw,
    };
    Ok(sequence_steps(actions, term)?.into_iter().fold(0.0, f64::max))
}

pub fn actions_from_scalars(values: &[f64]) -> Vec<ActionVector> {
    values.iter().map(|&v| ActionVector::scalar(v)).collect()
}
