//! Full likelihood of the sample data and the membership indicators.

use serde::Serialize;

use super::{selection_propensity, DiscreteJointDist, PiFunction};
use crate::design::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLikelihood {
    /// `-inf` when some factor is zero.
    pub value: f64,
    /// First unit (population index) whose factor is zero.
    pub zero_term_unit: Option<usize>,
}

/// `Σ_{i∈s} [log π(y_i,z_i) + log f_p(y_i|z_i)] + Σ_{j∉s} log(1 - Pr(j ∈ s | z_j))`.
///
/// `z_all` holds the covariates of every population unit, indexed by unit id;
/// all `y` and `z` values must lie on the table's supports.
pub fn full_log_likelihood(
    fp: &DiscreteJointDist,
    pi: &PiFunction,
    s: &Sample,
    z_all: &[Vec<f64>],
) -> Result<LogLikelihood> {
    let prs = selection_propensity(fp, pi)?;
    let cond = fp.conditional_table();

    let mut sampled: Vec<Option<usize>> = vec![None; z_all.len()];
    for (k, &id) in s.unit_ids.iter().enumerate() {
        let slot = sampled
            .get_mut(id)
            .ok_or_else(|| Error::InvalidArgument(format!("sampled unit {id} outside the population")))?;
        *slot = Some(k);
    }

    let mut total = 0.0;
    for (unit, z) in z_all.iter().enumerate() {
        let zi = fp
            .z_index(z)
            .ok_or_else(|| Error::InvalidArgument(format!("unit {unit}: z = {z:?} not on the support")))?;
        let factor_log = match sampled[unit] {
            Some(k) => {
                if s.z_row(k) != z.as_slice() {
                    return Err(Error::InvalidArgument(format!("unit {unit}: sample z disagrees with z_all")));
                }
                let yi = fp.y_index(s.y[k]).ok_or_else(|| {
                    Error::InvalidArgument(format!("unit {unit}: y = {} not on the support", s.y[k]))
                })?;
                let a = pi.get(yi, zi);
                let b = cond[yi][zi];
                if a == 0.0 || b == 0.0 {
                    None
                } else {
                    Some(a.ln() + b.ln())
                }
            }
            None => {
                let out = 1.0 - prs[zi];
                (out > 0.0).then(|| out.ln())
            }
        };
        match factor_log {
            Some(v) => total += v,
            None => return Ok(LogLikelihood { value: f64::NEG_INFINITY, zero_term_unit: Some(unit) }),
        }
    }
    Ok(LogLikelihood { value: total, zero_term_unit: None })
}

/// Log-likelihood over a one-parameter grid of `(f_p, π)` candidates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodProfile {
    pub points: Vec<(f64, f64)>,
    pub best_param: f64,
    pub best_value: f64,
}

/// Evaluates the full likelihood at each grid value and reports the maximizer.
pub fn profile_log_likelihood<F>(grid: &[f64], mut build: F, s: &Sample, z_all: &[Vec<f64>]) -> Result<LikelihoodProfile>
where
    F: FnMut(f64) -> Result<(DiscreteJointDist, PiFunction)>,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let (mut best_param, mut best_value) = (grid[0], f64::NEG_INFINITY);
    for &theta in grid {
        let (fp, pi) = build(theta)?;
        let ll = full_log_likelihood(&fp, &pi, s, z_all)?.value;
        if ll > best_value {
            best_param = theta;
            best_value = ll;
        }
        points.push((theta, ll));
    }
    Ok(LikelihoodProfile { points, best_param, best_value })
}
