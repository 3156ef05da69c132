//! Design-weighted and regression estimators computed from a [`Sample`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::Sample;
use crate::error::{Error, Result};
use crate::linalg::{weighted_least_squares, with_intercept};
use crate::sample_model::EswModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub name: String,
    /// A scalar estimate is a one-element vector.
    pub value: Vec<f64>,
    pub n_used: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimatorResult {
    fn new(name: &str, value: Vec<f64>, n_used: usize, weights: &[f64]) -> Result<Self> {
        if n_used == 0 {
            return Err(Error::InvalidArgument(format!("{name}: no units used")));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name}: non-finite estimate {value:?}")));
        }
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("weight_cv".to_string(), weight_cv(weights));
        Ok(EstimatorResult { name: name.to_string(), value, n_used, diagnostics })
    }

    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

/// Coefficient of variation of the weights (population standard deviation over mean).
pub fn weight_cv(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn require_nonempty(s: &Sample) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    Ok(())
}

fn ratio_mean<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> (f64, f64, usize) {
    let (mut num, mut den, mut n) = (0.0, 0.0, 0);
    for (y, w) in pairs {
        num += w * y;
        den += w;
        n += 1;
    }
    (num, den, n)
}

/// Unweighted sample mean.
pub fn sample_mean(s: &Sample) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let mean = s.y.iter().sum::<f64>() / s.len() as f64;
    EstimatorResult::new("sample_mean", vec![mean], s.len(), &vec![1.0; s.len()])
}

/// Hájek mean `Σ w_i y_i / Σ w_i`.
pub fn hajek_mean(s: &Sample) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let (num, den, n) = ratio_mean(s.y.iter().zip(&s.w));
    EstimatorResult::new("hajek", vec![num / den], n, &s.w)
}

/// What to do with a cell that has population units but no sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCellPolicy {
    #[default]
    Error,
    /// Drop such cells from both sums; dropped cells are listed in the diagnostics.
    Drop,
}

/// `Σ_j N_j ȳ_j / Σ_j N_j` with unweighted within-cell sample means.
pub fn poststratified_mean(s: &Sample, cell_sizes: &[f64]) -> Result<EstimatorResult> {
    poststratified_mean_with(s, cell_sizes, EmptyCellPolicy::Error)
}

pub fn poststratified_mean_with(
    s: &Sample,
    cell_sizes: &[f64],
    policy: EmptyCellPolicy,
) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let j = cell_sizes.len();
    if let Some(bad) = cell_sizes.iter().find(|n| !(**n >= 0.0 && n.is_finite())) {
        return Err(Error::InvalidArgument(format!("invalid cell size {bad}")));
    }
    let mut sums = vec![0.0; j];
    let mut counts = vec![0usize; j];
    for (&c, &y) in s.cell_id.iter().zip(&s.y) {
        if c >= j {
            return Err(Error::InvalidArgument(format!(
                "sampled cell id {c} but only {j} cell sizes given"
            )));
        }
        sums[c] += y;
        counts[c] += 1;
    }

    let mut dropped = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for cell in 0..j {
        let size = cell_sizes[cell];
        if size == 0.0 {
            continue;
        }
        if counts[cell] == 0 {
            match policy {
                EmptyCellPolicy::Error => return Err(Error::EmptyCell { cell, size }),
                EmptyCellPolicy::Drop => {
                    dropped.push(cell);
                    continue;
                }
            }
        }
        num += size * (sums[cell] / counts[cell] as f64);
        den += size;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("no cell with positive size has sampled units".into()));
    }

    let used = counts
        .iter()
        .zip(cell_sizes)
        .filter(|(_, n)| **n > 0.0)
        .map(|(c, _)| *c)
        .sum();
    let mut out = EstimatorResult::new("poststratified", vec![num / den], used, &s.w)?;
    out.diagnostics.insert("dropped_cells".into(), dropped.len() as f64);
    for cell in dropped {
        out.diagnostics.insert(format!("dropped_cell_{cell}"), cell_sizes[cell]);
    }
    Ok(out)
}

/// Hájek mean of domain 1 minus Hájek mean of domain 0.
pub fn weighted_domain_difference(s: &Sample, domain: &[bool]) -> Result<EstimatorResult> {
    if domain.len() != s.len() {
        return Err(Error::InvalidArgument(format!(
            "{} domain flags for {} units",
            domain.len(),
            s.len()
        )));
    }
    let part = |flag: bool| ratio_mean(s.y.iter().zip(&s.w).zip(domain).filter(|(_, d)| **d == flag).map(|(p, _)| p));
    let (num1, den1, n1) = part(true);
    let (num0, den0, n0) = part(false);
    if n1 == 0 {
        return Err(Error::EmptyDomain { domain: 1 });
    }
    if n0 == 0 {
        return Err(Error::EmptyDomain { domain: 0 });
    }
    let mut out = EstimatorResult::new("domain_difference", vec![num1 / den1 - num0 / den0], n0 + n1, &s.w)?;
    out.diagnostics.insert("domain1_mean".into(), num1 / den1);
    out.diagnostics.insert("domain0_mean".into(), num0 / den0);
    Ok(out)
}

/// Ordinary least squares of `y` on `(1, z)`.
pub fn ols_fit(s: &Sample) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let x = with_intercept(&s.z, s.len(), s.p);
    let coef = weighted_least_squares(&x, s.p + 1, &s.y, None)?;
    EstimatorResult::new("ols", coef, s.len(), &vec![1.0; s.len()])
}

/// `b_w = [Σ w_i z_i z_i']^{-1} Σ w_i z_i y_i` with an intercept in `z`.
pub fn weighted_regression_bw(s: &Sample) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let x = with_intercept(&s.z, s.len(), s.p);
    let coef = weighted_least_squares(&x, s.p + 1, &s.y, Some(&s.w))?;
    EstimatorResult::new("bw", coef, s.len(), &s.w)
}

/// Net-sampling weights `q_i = w_i / Ê_s(w | z_i)`.
pub fn q_weights(s: &Sample, esw: &EswModel) -> Result<Vec<f64>> {
    (0..s.len())
        .map(|i| {
            let denom = esw.predict_z(s.z_row(i))?;
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(Error::InvalidWeightModel(format!(
                    "fitted E_s(w|z) = {denom} at unit {}",
                    s.unit_ids[i]
                )));
            }
            Ok(s.w[i] / denom)
        })
        .collect()
}

/// `b_q`: weighted least squares with the q-weights.
pub fn q_weighted_regression_bq(s: &Sample, esw: &EswModel) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    let q = q_weights(s, esw)?;
    let x = with_intercept(&s.z, s.len(), s.p);
    let coef = weighted_least_squares(&x, s.p + 1, &s.y, Some(&q))?;
    EstimatorResult::new("bq", coef, s.len(), &q)
}

/// Population proportions of a binary design variable within one z level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XDistRow {
    /// Values of the non-x covariate columns defining the level.
    pub level: Vec<f64>,
    /// `[Pr(x = 0 | level), Pr(x = 1 | level)]`.
    pub probs: [f64; 2],
}

pub(crate) fn level_key(row: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same level
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Saturated cell means of y on (z, x), averaged over the population
/// distribution of x within each z level.
///
/// Returns one prediction per z level in `pop_x_dist` order. When z is a
/// single binary column, the diagnostics carry `contrast = E(y|z=1) - E(y|z=0)`.
pub fn two_step_regression(s: &Sample, x_col: usize, pop_x_dist: &[XDistRow]) -> Result<EstimatorResult> {
    require_nonempty(s)?;
    if x_col >= s.p {
        return Err(Error::InvalidArgument(format!("x column {x_col} outside 0..{}", s.p)));
    }
    for row in pop_x_dist {
        let total = row.probs[0] + row.probs[1];
        if (total - 1.0).abs() > 1e-9 || row.probs.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "x distribution for level {:?} sums to {total}",
                row.level
            )));
        }
    }

    let mut cells: BTreeMap<(Vec<u64>, u8), (f64, usize)> = BTreeMap::new();
    for i in 0..s.len() {
        let row = s.z_row(i);
        let x = row[x_col];
        let xv = if x == 0.0 {
            0
        } else if x == 1.0 {
            1
        } else {
            return Err(Error::InvalidArgument(format!("x column must be 0/1, got {x}")));
        };
        let rest: Vec<f64> = row.iter().enumerate().filter(|(j, _)| *j != x_col).map(|(_, v)| *v).collect();
        let e = cells.entry((level_key(&rest), xv)).or_insert((0.0, 0));
        e.0 += s.y[i];
        e.1 += 1;
    }

    let mut preds = Vec::with_capacity(pop_x_dist.len());
    for row in pop_x_dist {
        let key = level_key(&row.level);
        let mut pred = 0.0;
        for xv in 0..2u8 {
            let prob = row.probs[xv as usize];
            if prob == 0.0 {
                continue;
            }
            let (sum, count) = cells.get(&(key.clone(), xv)).ok_or_else(|| Error::EmptyCell {
                cell: 2 * preds.len() + xv as usize,
                size: prob,
            })?;
            pred += prob * sum / *count as f64;
        }
        preds.push(pred);
    }

    let mut out = EstimatorResult::new("two_step", preds.clone(), s.len(), &vec![1.0; s.len()])?;
    if s.p == 2 {
        let find = |v: f64| pop_x_dist.iter().position(|r| r.level == [v]);
        if let (Some(i1), Some(i0)) = (find(1.0), find(0.0)) {
            out.diagnostics.insert("contrast".into(), preds[i1] - preds[i0]);
        }
    }
    Ok(out)
}
