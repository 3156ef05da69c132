//! Synthetic finite populations from a linear superpopulation model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// How one covariate is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateSpec {
    /// Standard normal, one column in `z`.
    Normal,
    /// Categorical with the given probabilities. Category 0 is the reference
    /// level; categories `1..K` each get a 0/1 indicator column in `z`.
    Discrete { probs: Vec<f64> },
}

impl CovariateSpec {
    /// Number of columns this covariate contributes to `z`.
    pub fn width(&self) -> usize {
        match self {
            CovariateSpec::Normal => 1,
            CovariateSpec::Discrete { probs } => probs.len().saturating_sub(1),
        }
    }

    fn categories(&self) -> Option<usize> {
        match self {
            CovariateSpec::Normal => None,
            CovariateSpec::Discrete { probs } => Some(probs.len()),
        }
    }
}

/// `y = beta_0 + z'beta_rest + eps`, `eps ~ N(0, sigma_eps^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    /// Intercept first, then one coefficient per column of `z`.
    pub beta: Vec<f64>,
    pub sigma_eps: f64,
    pub covariates: Vec<CovariateSpec>,
    /// Indices into `covariates` (all discrete) whose category cross-product
    /// defines the poststratification cells. Empty means a single cell.
    #[serde(default)]
    pub cells: Vec<usize>,
}

impl PopulationModel {
    /// Number of columns of the covariate matrix.
    pub fn z_width(&self) -> usize {
        self.covariates.iter().map(CovariateSpec::width).sum()
    }

    /// Number of poststratification cells `J`.
    pub fn n_cells(&self) -> usize {
        self.cells
            .iter()
            .map(|&c| self.covariates[c].categories().unwrap_or(1))
            .product()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_eps must be positive and finite, got {}",
                self.sigma_eps
            )));
        }
        for (k, cov) in self.covariates.iter().enumerate() {
            if let CovariateSpec::Discrete { probs } = cov {
                if probs.len() < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "discrete covariate {k} needs at least two categories"
                    )));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "discrete covariate {k} has a negative probability"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "discrete covariate {k} probabilities sum to {total}"
                    )));
                }
            }
        }
        if self.beta.len() != 1 + self.z_width() {
            return Err(Error::InvalidArgument(format!(
                "beta has {} entries, expected 1 + {} covariate columns",
                self.beta.len(),
                self.z_width()
            )));
        }
        for &c in &self.cells {
            match self.covariates.get(c) {
                Some(CovariateSpec::Discrete { .. }) => {}
                Some(CovariateSpec::Normal) => {
                    return Err(Error::InvalidArgument(format!(
                        "cell covariate {c} is continuous"
                    )))
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "cell covariate {c} does not exist"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// A realized finite population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub y: Vec<f64>,
    /// Row-major `N x p` covariate matrix.
    pub z: Vec<f64>,
    pub p: usize,
    pub cell_id: Vec<usize>,
    pub cell_sizes: Vec<usize>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    pub fn n_cells(&self) -> usize {
        self.cell_sizes.len()
    }

    /// Builds a population from raw columns, tallying cell sizes.
    pub fn from_parts(
        y: Vec<f64>,
        z: Vec<f64>,
        p: usize,
        cell_id: Vec<usize>,
        n_cells: usize,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidArgument("population must have at least one unit".into()));
        }
        if z.len() != n * p || cell_id.len() != n {
            return Err(Error::InvalidArgument("population columns have mismatched lengths".into()));
        }
        let mut cell_sizes = vec![0usize; n_cells];
        for &c in &cell_id {
            *cell_sizes.get_mut(c).ok_or_else(|| {
                Error::InvalidArgument(format!("cell id {c} outside 0..{n_cells}"))
            })? += 1;
        }
        Ok(Population { y, z, p, cell_id, cell_sizes })
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }
}

/// Draws a population of `n` units. Identical inputs give identical output.
pub fn generate_population(model: &PopulationModel, n: usize, seed: u64) -> Result<Population> {
    if n == 0 {
        return Err(Error::InvalidArgument("population size N must be at least 1".into()));
    }
    model.validate()?;

    let p = model.z_width();
    let n_cells = model.n_cells();
    let mut rng = rng_from_seed(seed);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n * p);
    let mut cell_id = Vec::with_capacity(n);
    let mut codes = vec![0usize; model.covariates.len()];

    for _ in 0..n {
        let row_start = z.len();
        for (k, cov) in model.covariates.iter().enumerate() {
            match cov {
                CovariateSpec::Normal => z.push(rng.sample(StandardNormal)),
                CovariateSpec::Discrete { probs } => {
                    let code = draw_category(probs, rng.random::<f64>());
                    codes[k] = code;
                    z.extend((1..probs.len()).map(|c| if c == code { 1.0 } else { 0.0 }));
                }
            }
        }
        let eps: f64 = rng.sample(StandardNormal);
        let row = &z[row_start..];
        let linear = model.beta[0]
            + row.iter().zip(&model.beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        y.push(linear + model.sigma_eps * eps);

        // lexicographic order of category tuples, first cell covariate most significant
        let mut cell = 0;
        for &c in &model.cells {
            let k = model.covariates[c].categories().unwrap_or(1);
            cell = cell * k + codes[c];
        }
        cell_id.push(cell);
    }

    Population::from_parts(y, z, p, cell_id, n_cells)
}

fn draw_category(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// One poststratification cell and its members.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub size: usize,
    pub members: Vec<usize>,
}

/// Partitions `0..N` by cell, one entry per cell index `0..J` (empty cells included).
pub fn cell_structure(pop: &Population) -> Vec<Cell> {
    let mut cells: Vec<Cell> = (0..pop.n_cells())
        .map(|index| Cell { index, size: 0, members: Vec::new() })
        .collect();
    for (i, &c) in pop.cell_id.iter().enumerate() {
        cells[c].members.push(i);
    }
    for cell in &mut cells {
        cell.size = cell.members.len();
    }
    cells
}
