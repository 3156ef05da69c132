//! Informative Poisson sampling followed by an optional response stage.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;
use crate::rng::rng_from_seed;

/// Log-linear selection score `a0 + a_y*y + a_z'z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub a_y: f64,
    #[serde(default)]
    pub a_z: Vec<f64>,
}

/// Logistic response probability `1 / (1 + exp(-(b0 + b_y*y + b_z'z)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    #[serde(default)]
    pub b0: f64,
    #[serde(default)]
    pub b_y: f64,
    #[serde(default)]
    pub b_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionModel {
    pub selection: SelectionModel,
    #[serde(default)]
    pub response: Option<ResponseModel>,
    /// Expected number of respondents.
    pub target_n: f64,
}

/// Whether sample weights invert the full inclusion probability or only
/// the selection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    TrueCombined,
    SelectionOnly,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" | "true-combined" => Ok(WeightMode::TrueCombined),
            "selection-only" => Ok(WeightMode::SelectionOnly),
            other => Err(Error::InvalidArgument(format!("unknown weight mode {other:?}"))),
        }
    }
}

fn dot(a: &[f64], z: &[f64]) -> f64 {
    a.iter().zip(z).map(|(x, y)| x * y).sum()
}

impl SelectionModel {
    pub fn score(&self, y: f64, z: &[f64]) -> f64 {
        self.a0 + self.a_y * y + dot(&self.a_z, z)
    }
}

impl ResponseModel {
    pub fn probability(&self, y: f64, z: &[f64]) -> f64 {
        let eta = self.b0 + self.b_y * y + dot(&self.b_z, z);
        1.0 / (1.0 + (-eta).exp())
    }
}

impl InclusionModel {
    fn check_widths(&self, p: usize) -> Result<()> {
        if self.selection.a_z.len() > p {
            return Err(Error::InvalidArgument(format!(
                "a_z has {} entries but z has {p} columns",
                self.selection.a_z.len()
            )));
        }
        if let Some(r) = &self.response {
            if r.b_z.len() > p {
                return Err(Error::InvalidArgument(format!(
                    "b_z has {} entries but z has {p} columns",
                    r.b_z.len()
                )));
            }
        }
        Ok(())
    }
}

/// Per-unit selection and response probabilities; `combined = selection * response`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionProbs {
    pub selection: Vec<f64>,
    pub response: Vec<f64>,
    pub combined: Vec<f64>,
    /// Calibrated scale `c` applied to `exp(score)`.
    pub scale: f64,
}

/// Calibrates `c` so that `Σ min(1, c·exp(score_i))·r_i = target_n`.
pub fn inclusion_components(pop: &Population, model: &InclusionModel) -> Result<InclusionProbs> {
    let n = pop.len();
    let target = model.target_n;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target_n must be positive, got {target}")));
    }
    if target >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "target_n = {target} must be below the population size {n}"
        )));
    }
    model.check_widths(pop.p)?;

    let response: Vec<f64> = match &model.response {
        Some(r) => (0..n).map(|i| r.probability(pop.y[i], pop.z_row(i))).collect(),
        None => vec![1.0; n],
    };
    let reachable: f64 = response.iter().sum();
    if reachable <= target {
        return Err(Error::InvalidArgument(format!(
            "expected respondents cannot reach target_n = {target}: at most {reachable} with every unit selected"
        )));
    }

    let scores: Vec<f64> = (0..n).map(|i| model.selection.score(pop.y[i], pop.z_row(i))).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite selection score".into()));
    }
    // shift so the largest score is 0; the shift is absorbed into c
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();

    let expected = |log_c: f64| -> f64 {
        let c = log_c.exp();
        rel.iter().zip(&response).map(|(e, r)| (c * e).min(1.0) * r).sum()
    };

    // uncapped solution undershoots once caps bind; all-capped overshoots
    let uncapped: f64 = rel.iter().zip(&response).map(|(e, r)| e * r).sum();
    let mut lo = (target / uncapped).ln();
    let bottom = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = (top - bottom).max(lo) + 1.0;
    if expected(lo) >= target {
        hi = lo;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if expected(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let c = hi.exp();

    let selection: Vec<f64> = rel.iter().map(|e| (c * e).min(1.0)).collect();
    let combined: Vec<f64> = selection.iter().zip(&response).map(|(s, r)| s * r).collect();
    if combined.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidArgument(
            "selection model produces zero inclusion probability (score range too wide)".into(),
        ));
    }
    Ok(InclusionProbs { selection, response, combined, scale: c * (-top).exp() })
}

/// Combined inclusion probabilities `π_i` calibrated to `target_n` expected respondents.
pub fn compute_inclusion_probs(pop: &Population, model: &InclusionModel) -> Result<Vec<f64>> {
    inclusion_components(pop, model).map(|c| c.combined)
}

/// Observed units with their design weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub unit_ids: Vec<usize>,
    pub y: Vec<f64>,
    /// Row-major `n x p`.
    pub z: Vec<f64>,
    pub p: usize,
    pub cell_id: Vec<usize>,
    pub w: Vec<f64>,
    pub weight_mode: WeightMode,
    /// Set once a response stage has been applied.
    #[serde(default)]
    pub response_applied: bool,
}

impl Sample {
    /// Builds a sample from observed columns, as read from a file.
    pub fn from_columns(y: Vec<f64>, z: Vec<f64>, p: usize, w: Vec<f64>, cell_id: Vec<usize>) -> Result<Self> {
        let n = y.len();
        if z.len() != n * p || w.len() != n || cell_id.len() != n {
            return Err(Error::InvalidArgument("sample columns have mismatched lengths".into()));
        }
        Ok(Sample {
            unit_ids: (0..n).collect(),
            y,
            z,
            p,
            cell_id,
            w,
            weight_mode: WeightMode::TrueCombined,
            response_applied: false,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    /// Same sample with every weight multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> Sample {
        let mut s = self.clone();
        s.w.iter_mut().for_each(|w| *w *= c);
        s
    }

    fn keep(&self, keep: &[bool]) -> Sample {
        let mut out = Sample {
            unit_ids: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            p: self.p,
            cell_id: Vec::new(),
            w: Vec::new(),
            weight_mode: self.weight_mode,
            response_applied: self.response_applied,
        };
        for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            out.unit_ids.push(self.unit_ids[i]);
            out.y.push(self.y[i]);
            out.z.extend_from_slice(self.z_row(i));
            out.cell_id.push(self.cell_id[i]);
            out.w.push(self.w[i]);
        }
        out
    }
}

/// Independent Bernoulli(π_i) inclusion of every population unit.
pub fn draw_sample(pop: &Population, pi: &[f64], seed: u64) -> Result<Sample> {
    if pi.len() != pop.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inclusion probabilities for {} units",
            pi.len(),
            pop.len()
        )));
    }
    if let Some(bad) = pi.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("inclusion probability {bad} outside (0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut s = Sample {
        unit_ids: Vec::new(),
        y: Vec::new(),
        z: Vec::new(),
        p: pop.p,
        cell_id: Vec::new(),
        w: Vec::new(),
        weight_mode: WeightMode::TrueCombined,
        response_applied: false,
    };
    for (i, &p) in pi.iter().enumerate() {
        // one uniform per unit keeps the stream aligned across designs
        let u: f64 = rng.random();
        if u < p {
            s.unit_ids.push(i);
            s.y.push(pop.y[i]);
            s.z.extend_from_slice(pop.z_row(i));
            s.cell_id.push(pop.cell_id[i]);
            s.w.push(1.0 / p);
        }
    }
    Ok(s)
}

/// Keeps each selected unit with its response probability.
///
/// The incoming weights must be selection-only (`1/π_sel`). Under
/// [`WeightMode::TrueCombined`] respondents get `1/(π_sel·π_resp)`; under
/// [`WeightMode::SelectionOnly`] the selection weights are left as they are.
pub fn apply_response(sample: &Sample, model: &InclusionModel, seed: u64, mode: WeightMode) -> Result<Sample> {
    let response = model
        .response
        .as_ref()
        .ok_or_else(|| Error::InvalidState("no response model configured".into()))?;
    if sample.response_applied {
        return Err(Error::InvalidState("response stage already applied to this sample".into()));
    }
    model.check_widths(sample.p)?;

    let mut rng = rng_from_seed(seed);
    let probs: Vec<f64> = (0..sample.len()).map(|i| response.probability(sample.y[i], sample.z_row(i))).collect();
    let keep: Vec<bool> = probs.iter().map(|&r| rng.random::<f64>() < r).collect();
    let mut out = sample.keep(&keep);
    if mode == WeightMode::TrueCombined {
        let kept_probs = probs.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| *r);
        for (w, r) in out.w.iter_mut().zip(kept_probs) {
            *w /= r;
        }
    }
    out.weight_mode = mode;
    out.response_applied = true;
    Ok(out)
}

/// Full pipeline: calibrate, select, then respond if a response model exists.
pub fn draw_respondents(
    pop: &Population,
    model: &InclusionModel,
    mode: WeightMode,
    selection_seed: u64,
    response_seed: u64,
) -> Result<Sample> {
    let probs = inclusion_components(pop, model)?;
    let selected = draw_sample(pop, &probs.selection, selection_seed)?;
    if model.response.is_some() {
        apply_response(&selected, model, response_seed, mode)
    } else {
        Ok(selected)
    }
}
