//! Prediction of the finite-population total through the sample-complement model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EswModel;
use crate::design::Sample;
use crate::error::{Error, Result};
use crate::estimators::{level_key, EstimatorResult};
use crate::population::Population;

/// Number of non-sampled units at one z level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: Vec<f64>,
    pub count: f64,
}

/// How `E_s[(w-1) y | z] / E_s[(w-1) | z]` is estimated.
#[derive(Debug, Clone, Copy)]
pub enum TotalMode<'a> {
    /// Within-level sample means of `(w-1) y` and `(w-1)`.
    MethodOfMoments,
    /// Same ratio with each `w_i` replaced by the fitted `E_s(w | y_i, z_i)`.
    Model(&'a EswModel),
}

/// `Ŷ = Σ_s y_i + Σ_{j ∉ s} E_s[(w_j-1) y_j | z_j] / E_s[(w_j-1) | z_j]` for discrete z.
pub fn predict_total(s: &Sample, nonsample: &[LevelCount], mode: TotalMode<'_>) -> Result<EstimatorResult> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let excess: Vec<f64> = match mode {
        TotalMode::MethodOfMoments => s.w.iter().map(|w| w - 1.0).collect(),
        TotalMode::Model(m) => (0..s.len())
            .map(|i| m.predict(s.y[i], s.z_row(i)).map(|e| e - 1.0))
            .collect::<Result<_>>()?,
    };

    // per level: (Σ (w-1) y, Σ (w-1))
    let mut moments: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    for i in 0..s.len() {
        let e = moments.entry(level_key(s.z_row(i))).or_insert((0.0, 0.0));
        e.0 += excess[i] * s.y[i];
        e.1 += excess[i];
    }

    let observed: f64 = s.y.iter().sum();
    let mut predicted = 0.0;
    let mut levels_used = 0usize;
    for lc in nonsample {
        if !(lc.count >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative nonsample count at level {:?}", lc.level)));
        }
        if lc.count == 0.0 {
            continue;
        }
        let (num, den) = moments
            .get(&level_key(&lc.level))
            .ok_or_else(|| Error::UnsupportedLevel { level: lc.level.clone() })?;
        if !(*den > 0.0) {
            return Err(Error::DegenerateWeights { level: lc.level.clone() });
        }
        predicted += lc.count * num / den;
        levels_used += 1;
    }

    let mut out = EstimatorResult {
        name: "predict_total".into(),
        value: vec![observed + predicted],
        n_used: s.len(),
        diagnostics: BTreeMap::new(),
    };
    out.diagnostics.insert("weight_cv".into(), crate::estimators::weight_cv(&s.w));
    out.diagnostics.insert("observed_sum".into(), observed);
    out.diagnostics.insert("predicted_nonsample".into(), predicted);
    out.diagnostics.insert("levels_used".into(), levels_used as f64);
    Ok(out)
}

/// Non-sampled unit counts per distinct z row of the population, in first-seen order.
pub fn nonsample_level_counts(pop: &Population, s: &Sample) -> Vec<LevelCount> {
    let mut in_sample = vec![false; pop.len()];
    for &id in &s.unit_ids {
        if id < pop.len() {
            in_sample[id] = true;
        }
    }
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut out: Vec<LevelCount> = Vec::new();
    for i in 0..pop.len() {
        let row = pop.z_row(i);
        let k = *index.entry(level_key(row)).or_insert_with(|| {
            out.push(LevelCount { level: row.to_vec(), count: 0.0 });
            out.len() - 1
        });
        if !in_sample[i] {
            out[k].count += 1.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_level(y: Vec<f64>, w: Vec<f64>) -> Sample {
        let n = y.len();
        Sample::from_columns(y, vec![], 0, w, vec![0; n]).unwrap()
    }

    #[test]
    fn hand_moment_value() {
        let s = one_level(vec![2.0, 4.0], vec![2.0, 3.0]);
        let t = predict_total(&s, &[LevelCount { level: vec![], count: 5.0 }], TotalMode::MethodOfMoments).unwrap();
        assert!((t.scalar() - (6.0 + 50.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn constant_weights_give_expansion_estimator() {
        let y = vec![1.5, 2.0, 7.0, 3.25];
        let (big_n, n) = (20.0, 4.0);
        let s = one_level(y.clone(), vec![big_n / n; 4]);
        let t = predict_total(&s, &[LevelCount { level: vec![], count: big_n - n }], TotalMode::MethodOfMoments)
            .unwrap();
        let mean = y.iter().sum::<f64>() / n;
        assert!((t.scalar() - big_n * mean).abs() < 1e-12);
    }

    #[test]
    fn census_returns_observed_sum() {
        let s = one_level(vec![1.0, 2.0, 3.0], vec![1.0; 3]);
        let t = predict_total(&s, &[LevelCount { level: vec![], count: 0.0 }], TotalMode::MethodOfMoments).unwrap();
        assert_eq!(t.scalar(), 6.0);
    }

    #[test]
    fn missing_level_and_degenerate_weights() {
        let s = Sample::from_columns(vec![1.0, 2.0], vec![0.0, 0.0], 1, vec![1.0, 1.0], vec![0; 2]).unwrap();
        let err = predict_total(&s, &[LevelCount { level: vec![1.0], count: 3.0 }], TotalMode::MethodOfMoments)
            .unwrap_err();
        assert_eq!(err, Error::UnsupportedLevel { level: vec![1.0] });
        let err = predict_total(&s, &[LevelCount { level: vec![0.0], count: 3.0 }], TotalMode::MethodOfMoments)
            .unwrap_err();
        assert_eq!(err, Error::DegenerateWeights { level: vec![0.0] });
    }

    #[test]
    fn level_counts_exclude_sampled_units() {
        let pop = Population::from_parts(vec![0.0; 5], vec![0.0, 1.0, 0.0, 1.0, 1.0], 1, vec![0; 5], 1).unwrap();
        let s = Sample { unit_ids: vec![1, 2], ..one_level(vec![0.0, 0.0], vec![1.0, 1.0]) };
        let counts = nonsample_level_counts(&pop, &s);
        assert_eq!(counts.len(), 2);
        assert_eq!((counts[0].level.clone(), counts[0].count), (vec![0.0], 1.0));
        assert_eq!((counts[1].level.clone(), counts[1].count), (vec![1.0], 2.0));
    }
}
