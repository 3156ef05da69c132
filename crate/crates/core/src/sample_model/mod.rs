//! Sample, population and sample-complement distributions.
//!
//! The exact engine works on finite `(y, z)` grids: given the population
//! table `f_p` and the inclusion table `π(y, z)` it produces the sample
//! distribution `f_s`, inverts it back to `f_p` through the weight
//! expectations, and builds the sample-complement distribution `f_c` two
//! independent ways. The remaining submodules estimate `E_s(w | ·)` from
//! data, predict finite-population totals and evaluate the full likelihood.

mod esw;
mod exact;
mod likelihood;
mod total;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use esw::{estimate_esw, EswForm, EswModel, ZFit, ZModel};
pub use exact::{
    exact_complement_pdf, exact_sample_pdf, identity_residuals, ignorability_check,
    recover_population_pdf, selection_propensity, IdentityReport,
};
pub use likelihood::{full_log_likelihood, profile_log_likelihood, LikelihoodProfile, LogLikelihood};
pub use total::{nonsample_level_counts, predict_total, LevelCount, TotalMode};

/// Largest number of points allowed on either support.
pub const MAX_SUPPORT: usize = 64;

/// Probability table over a finite `(y, z)` grid, `p[y_index][z_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJointDist {
    pub y_support: Vec<f64>,
    pub z_support: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

fn check_grid(name: &str, table: &[Vec<f64>], ny: usize, nz: usize) -> Result<()> {
    if table.len() != ny || table.iter().any(|row| row.len() != nz) {
        return Err(Error::InvalidArgument(format!("{name} table must be {ny} x {nz}")));
    }
    Ok(())
}

impl DiscreteJointDist {
    /// Validates shape, sign and normalization.
    pub fn new(y_support: Vec<f64>, z_support: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> Result<Self> {
        let d = DiscreteJointDist { y_support, z_support, p };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (ny, nz) = (self.ny(), self.nz());
        if ny == 0 || nz == 0 || ny > MAX_SUPPORT || nz > MAX_SUPPORT {
            return Err(Error::InvalidArgument(format!(
                "supports must have between 1 and {MAX_SUPPORT} points, got {ny} x {nz}"
            )));
        }
        check_grid("probability", &self.p, ny, nz)?;
        if let Some(bad) = self.p.iter().flatten().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("probability {bad} is not a finite nonnegative number")));
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn ny(&self) -> usize {
        self.y_support.len()
    }

    pub fn nz(&self) -> usize {
        self.z_support.len()
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// Marginal probability of each z support point.
    pub fn z_marginal(&self) -> Vec<f64> {
        (0..self.nz()).map(|z| (0..self.ny()).map(|y| self.p[y][z]).sum()).collect()
    }

    /// `f(y | z)` for one z support point; `None` when the point has no mass.
    pub fn conditional(&self, z: usize) -> Option<Vec<f64>> {
        let mass: f64 = (0..self.ny()).map(|y| self.p[y][z]).sum();
        (mass > 0.0).then(|| (0..self.ny()).map(|y| self.p[y][z] / mass).collect())
    }

    /// Conditional table `[y][z]`, zero columns where z has no mass.
    pub fn conditional_table(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.nz()]; self.ny()];
        for z in 0..self.nz() {
            if let Some(c) = self.conditional(z) {
                for (y, v) in c.into_iter().enumerate() {
                    out[y][z] = v;
                }
            }
        }
        out
    }

    pub(crate) fn y_index(&self, y: f64) -> Option<usize> {
        self.y_support.iter().position(|v| *v == y)
    }

    pub(crate) fn z_index(&self, z: &[f64]) -> Option<usize> {
        self.z_support.iter().position(|v| v.as_slice() == z)
    }

    /// Assembles a joint table from per-z conditionals and an unnormalized z marginal.
    pub(crate) fn from_conditionals(like: &DiscreteJointDist, cond: &[Vec<f64>], z_mass: &[f64]) -> Self {
        let total: f64 = z_mass.iter().sum();
        let (ny, nz) = (like.ny(), like.nz());
        let mut p = vec![vec![0.0; nz]; ny];
        for z in 0..nz {
            let fz = z_mass[z] / total;
            for y in 0..ny {
                p[y][z] = fz * cond[z][y];
            }
        }
        DiscreteJointDist { y_support: like.y_support.clone(), z_support: like.z_support.clone(), p }
    }
}

/// Inclusion probabilities `Pr(i ∈ s | y, z)` on the same grid, `values[y][z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiFunction {
    pub values: Vec<Vec<f64>>,
}

impl PiFunction {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = values.iter().flatten().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("inclusion probability {bad} outside (0, 1]")));
        }
        Ok(PiFunction { values })
    }

    pub fn check_against(&self, fp: &DiscreteJointDist) -> Result<()> {
        check_grid("inclusion", &self.values, fp.ny(), fp.nz())?;
        if let Some(bad) = self.values.iter().flatten().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("inclusion probability {bad} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn get(&self, y: usize, z: usize) -> f64 {
        self.values[y][z]
    }
}
