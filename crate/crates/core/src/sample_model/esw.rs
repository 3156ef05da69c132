//! Models for the sample expectation of the weights, `E_s(w | y, z)` and `E_s(w | z)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::Sample;
use crate::error::{Error, Result};
use crate::estimators::level_key;
use crate::linalg::weighted_least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EswForm {
    /// `E_s(w | ·) = c'x`.
    Linear,
    /// `E_s(w | ·) = exp(c'x)`, fit by least squares on `log w`.
    #[default]
    LogLinear,
}

/// How the z-only companion model is fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZFit {
    /// Regression of w (or log w) on `(1, z)`.
    #[default]
    Regression,
    /// Per-level sample means of w, for discrete z.
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZModel {
    Constant(f64),
    Regression { form: EswForm, coef: Vec<f64> },
    /// `(level, mean w)` pairs.
    Saturated { levels: Vec<(Vec<f64>, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EswModel {
    pub form: EswForm,
    /// Coefficients on `(1, y, z)`; absent for hand-built z-only models.
    pub full: Option<Vec<f64>>,
    pub z_model: ZModel,
}

fn apply(form: EswForm, coef: &[f64], x: impl Iterator<Item = f64>) -> f64 {
    let eta: f64 = coef.iter().zip(x).map(|(c, v)| c * v).sum();
    match form {
        EswForm::Linear => eta,
        EswForm::LogLinear => eta.exp(),
    }
}

impl EswModel {
    /// `E_s(w | ·) ≡ c`.
    pub fn constant(c: f64) -> Self {
        EswModel { form: EswForm::Linear, full: None, z_model: ZModel::Constant(c) }
    }

    /// Saturated per-level means of w, with no `(y, z)` part.
    pub fn saturated_from_sample(s: &Sample) -> Result<Self> {
        Ok(EswModel { form: EswForm::Linear, full: None, z_model: saturated(s)? })
    }

    /// Fitted `E_s(w | y, z)`.
    pub fn predict(&self, y: f64, z: &[f64]) -> Result<f64> {
        let coef = self
            .full
            .as_ref()
            .ok_or_else(|| Error::InvalidState("weight model has no (y, z) component".into()))?;
        if coef.len() != z.len() + 2 {
            return Err(Error::InvalidArgument(format!(
                "weight model expects {} covariates, got {}",
                coef.len() - 2,
                z.len()
            )));
        }
        Ok(apply(self.form, coef, [1.0, y].into_iter().chain(z.iter().copied())))
    }

    /// Fitted `E_s(w | z)`.
    pub fn predict_z(&self, z: &[f64]) -> Result<f64> {
        match &self.z_model {
            ZModel::Constant(c) => Ok(*c),
            ZModel::Regression { form, coef } => {
                if coef.len() != z.len() + 1 {
                    return Err(Error::InvalidArgument(format!(
                        "weight model expects {} covariates, got {}",
                        coef.len() - 1,
                        z.len()
                    )));
                }
                Ok(apply(*form, coef, std::iter::once(1.0).chain(z.iter().copied())))
            }
            ZModel::Saturated { levels } => levels
                .iter()
                .find(|(l, _)| level_key(l) == level_key(z))
                .map(|(_, m)| *m)
                .ok_or_else(|| Error::UnsupportedLevel { level: z.to_vec() }),
        }
    }
}

fn saturated(s: &Sample) -> Result<ZModel> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut acc: BTreeMap<Vec<u64>, (Vec<f64>, f64, usize)> = BTreeMap::new();
    for i in 0..s.len() {
        let row = s.z_row(i);
        let e = acc.entry(level_key(row)).or_insert_with(|| (row.to_vec(), 0.0, 0));
        e.1 += s.w[i];
        e.2 += 1;
    }
    Ok(ZModel::Saturated {
        levels: acc.into_values().map(|(l, sum, n)| (l, sum / n as f64)).collect(),
    })
}

fn response(form: EswForm, w: &[f64]) -> Result<Vec<f64>> {
    match form {
        EswForm::Linear => Ok(w.to_vec()),
        EswForm::LogLinear => {
            if let Some(bad) = w.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::InvalidArgument(format!("log-linear weight model needs w > 0, got {bad}")));
            }
            Ok(w.iter().map(|v| v.ln()).collect())
        }
    }
}

/// Fits `E_s(w | y, z)` on `(1, y, z)` and a z-only companion model from the sample.
pub fn estimate_esw(s: &Sample, form: EswForm, z_fit: ZFit) -> Result<EswModel> {
    let n = s.len();
    if n <= s.p + 2 {
        return Err(Error::InvalidArgument(format!(
            "weight model needs more than {} units, got {n}",
            s.p + 2
        )));
    }
    let target = response(form, &s.w)?;

    let mut design = Vec::with_capacity(n * (s.p + 2));
    for i in 0..n {
        design.push(1.0);
        design.push(s.y[i]);
        design.extend_from_slice(s.z_row(i));
    }
    let full = weighted_least_squares(&design, s.p + 2, &target, None)?;
    let model = EswModel { form, full: Some(full), z_model: ZModel::Constant(1.0) };
    for i in 0..n {
        let fitted = model.predict(s.y[i], s.z_row(i))?;
        if !(fitted > 0.0) {
            return Err(Error::InvalidWeightModel(format!(
                "fitted E_s(w|y,z) = {fitted} at unit {}",
                s.unit_ids[i]
            )));
        }
    }

    let z_model = match z_fit {
        ZFit::Saturated => saturated(s)?,
        ZFit::Regression => {
            let mut design = Vec::with_capacity(n * (s.p + 1));
            for i in 0..n {
                design.push(1.0);
                design.extend_from_slice(s.z_row(i));
            }
            let coef = weighted_least_squares(&design, s.p + 1, &target, None)?;
            ZModel::Regression { form, coef }
        }
    };
    let model = EswModel { z_model, ..model };
    for i in 0..n {
        let fitted = model.predict_z(s.z_row(i))?;
        if !(fitted > 0.0) {
            return Err(Error::InvalidWeightModel(format!(
                "fitted E_s(w|z) = {fitted} at unit {}",
                s.unit_ids[i]
            )));
        }
    }
    Ok(model)
}
