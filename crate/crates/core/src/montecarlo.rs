//! Replicated design experiments with bias / variance / MSE summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{draw_respondents, draw_sample, InclusionModel, Sample, WeightMode};
use crate::error::{Error, Result};
use crate::estimators::{
    hajek_mean, ols_fit, poststratified_mean_with, q_weighted_regression_bq, sample_mean, two_step_regression,
    weighted_domain_difference, weighted_regression_bw, EmptyCellPolicy, XDistRow,
};
use crate::io::fmt_num;
use crate::linalg::{weighted_least_squares, with_intercept};
use crate::population::{generate_population, Population, PopulationModel};
use crate::rng::derive_seed;
use crate::sample_model::{estimate_esw, nonsample_level_counts, predict_total, EswForm, TotalMode, ZFit};

const STREAM_POPULATION: u64 = 0;
const STREAM_SELECTION: u64 = 1;
const STREAM_RESPONSE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// Every unit observed with weight 1.
    Census,
    Poisson(InclusionModel),
}

fn default_x_column() -> usize {
    1
}

/// One estimator to run in each replication, with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    SampleMean,
    Hajek,
    Poststratified {
        #[serde(default)]
        drop_empty_cells: bool,
    },
    /// Domain 1 is `z[column] != 0`.
    DomainDifference {
        #[serde(default)]
        column: usize,
    },
    Ols,
    Bw,
    Bq {
        #[serde(default)]
        form: EswForm,
        #[serde(default)]
        z_fit: ZFit,
    },
    /// Requires exactly two covariate columns: the binary z and the binary x.
    TwoStep {
        #[serde(default = "default_x_column")]
        x_column: usize,
    },
    /// `esw = None` uses within-level sample moments.
    PredictTotal {
        #[serde(default)]
        esw: Option<EswForm>,
    },
}

impl EstimatorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSpec::SampleMean => "sample_mean",
            EstimatorSpec::Hajek => "hajek",
            EstimatorSpec::Poststratified { .. } => "poststratified",
            EstimatorSpec::DomainDifference { .. } => "domain_difference",
            EstimatorSpec::Ols => "ols",
            EstimatorSpec::Bw => "bw",
            EstimatorSpec::Bq { .. } => "bq",
            EstimatorSpec::TwoStep { .. } => "two_step",
            EstimatorSpec::PredictTotal { .. } => "predict_total",
        }
    }

    /// Estimator with default options from its name.
    pub fn from_name(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::json!({ "name": name }))
            .map_err(|e| Error::InvalidArgument(format!("unknown estimator {name:?}: {e}")))
    }

    /// Component labels for a population with `p` covariate columns.
    pub fn components(&self, p: usize) -> Vec<String> {
        match self {
            EstimatorSpec::SampleMean | EstimatorSpec::Hajek | EstimatorSpec::Poststratified { .. } => {
                vec!["mean".into()]
            }
            EstimatorSpec::DomainDifference { .. } => vec!["difference".into()],
            EstimatorSpec::TwoStep { .. } => vec!["contrast".into()],
            EstimatorSpec::PredictTotal { .. } => vec!["total".into()],
            EstimatorSpec::Ols | EstimatorSpec::Bw | EstimatorSpec::Bq { .. } => {
                std::iter::once("intercept".to_string()).chain((1..=p).map(|j| format!("z_{j}"))).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population: PopulationModel,
    pub n_population: usize,
    pub design: Design,
    #[serde(default)]
    pub weight_mode: WeightMode,
    pub estimators: Vec<EstimatorSpec>,
    pub replications: usize,
    pub seed: u64,
    /// Draw one population up front and reuse it in every replication.
    #[serde(default)]
    pub fixed_population: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("estimator list is empty".into()));
        }
        if self.n_population == 0 {
            return Err(Error::InvalidArgument("n_population must be at least 1".into()));
        }
        self.population.validate()?;
        if let Design::Poisson(m) = &self.design {
            if m.target_n >= self.n_population as f64 {
                return Err(Error::InvalidArgument(format!(
                    "target_n = {} must be below n_population = {}",
                    m.target_n, self.n_population
                )));
            }
        }
        Ok(())
    }
}

/// Monte Carlo moments of a set of estimates around a truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub bias: f64,
    /// Denominator `R - 1`; zero when `R = 1`.
    pub variance: f64,
    /// Mean squared deviation from the truth (denominator `R`).
    pub mse: f64,
    /// Standard deviation over `sqrt(R)`.
    pub mcse: f64,
}

pub fn summarize(estimates: &[f64], truth: f64) -> Summary {
    let r = estimates.len();
    if r == 0 {
        return Summary { bias: f64::NAN, variance: f64::NAN, mse: f64::NAN, mcse: f64::NAN };
    }
    let rf = r as f64;
    let mean = estimates.iter().sum::<f64>() / rf;
    let ss: f64 = estimates.iter().map(|e| (e - mean).powi(2)).sum();
    let variance = if r > 1 { ss / (rf - 1.0) } else { 0.0 };
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / rf;
    Summary { bias: mean - truth, variance, mse, mcse: variance.sqrt() / rf.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub estimator: String,
    pub component: String,
    /// NaN when the estimator failed.
    pub estimate: f64,
    pub truth: f64,
    /// Error code when the estimator failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub component: String,
    pub mean_estimate: f64,
    pub mean_truth: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub mcse: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SimulationReport {
    pub fn row(&self, estimator: &str, component: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.estimator == estimator && r.component == component)
    }

    /// Estimates of one estimator component, in replication order, with failures removed.
    pub fn estimates(&self, estimator: &str, component: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.estimator == estimator && r.component == component && r.error.is_none())
            .map(|r| r.estimate)
            .collect()
    }

    pub fn write_replications_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replication", "estimator", "component", "estimate", "truth", "error_flag"])?;
        for r in &self.records {
            w.write_record([
                r.replication.to_string(),
                r.estimator.clone(),
                r.component.clone(),
                fmt_num(r.estimate),
                fmt_num(r.truth),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "estimator",
            "component",
            "mean_estimate",
            "mean_truth",
            "bias",
            "variance",
            "mse",
            "mcse",
            "failures",
        ])?;
        for r in &self.summary {
            w.write_record([
                r.estimator.clone(),
                r.component.clone(),
                fmt_num(r.mean_estimate),
                fmt_num(r.mean_truth),
                fmt_num(r.bias),
                fmt_num(r.variance),
                fmt_num(r.mse),
                fmt_num(r.mcse),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn domain_flags(z: &[f64], p: usize, column: usize) -> Result<Vec<bool>> {
    if column >= p {
        return Err(Error::InvalidArgument(format!("domain column {column} outside 0..{p}")));
    }
    Ok(z.chunks(p).map(|row| row[column] != 0.0).collect())
}

fn population_mean_difference(pop: &Population, column: usize) -> Result<f64> {
    let flags = domain_flags(&pop.z, pop.p, column)?;
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (y, f) in pop.y.iter().zip(&flags) {
        if *f {
            s1 += y;
            n1 += 1;
        } else {
            s0 += y;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyDomain { domain: if n1 == 0 { 1 } else { 0 } });
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

fn population_x_dist(pop: &Population, x_col: usize) -> Result<Vec<XDistRow>> {
    if pop.p != 2 || x_col > 1 {
        return Err(Error::InvalidArgument("two-step estimator needs exactly two covariate columns".into()));
    }
    let z_col = 1 - x_col;
    let mut rows = Vec::new();
    for level in [0.0, 1.0] {
        let (mut n, mut n1) = (0usize, 0usize);
        for i in 0..pop.len() {
            let r = pop.z_row(i);
            if r[z_col] == level {
                n += 1;
                if r[x_col] != 0.0 {
                    n1 += 1;
                }
            }
        }
        if n > 0 {
            let p1 = n1 as f64 / n as f64;
            rows.push(XDistRow { level: vec![level], probs: [1.0 - p1, p1] });
        }
    }
    Ok(rows)
}

/// Population truths, filled on first use.
struct Truths<'a> {
    pop: &'a Population,
    coef: Option<Result<Vec<f64>>>,
}

impl<'a> Truths<'a> {
    fn coefficients(&mut self) -> Result<Vec<f64>> {
        let pop = self.pop;
        self.coef
            .get_or_insert_with(|| {
                let x = with_intercept(&pop.z, pop.len(), pop.p);
                weighted_least_squares(&x, pop.p + 1, &pop.y, None)
            })
            .clone()
    }

    fn for_spec(&mut self, spec: &EstimatorSpec) -> Result<Vec<f64>> {
        match spec {
            EstimatorSpec::SampleMean | EstimatorSpec::Hajek | EstimatorSpec::Poststratified { .. } => {
                Ok(vec![self.pop.mean()])
            }
            EstimatorSpec::PredictTotal { .. } => Ok(vec![self.pop.total()]),
            EstimatorSpec::DomainDifference { column } => Ok(vec![population_mean_difference(self.pop, *column)?]),
            EstimatorSpec::TwoStep { x_column } => {
                if *x_column > 1 || self.pop.p != 2 {
                    return Err(Error::InvalidArgument("two-step estimator needs exactly two covariate columns".into()));
                }
                Ok(vec![population_mean_difference(self.pop, 1 - x_column)?])
            }
            EstimatorSpec::Ols | EstimatorSpec::Bw | EstimatorSpec::Bq { .. } => self.coefficients(),
        }
    }
}

/// Runs one estimator on a sample drawn from `pop`.
pub fn evaluate(spec: &EstimatorSpec, pop: &Population, s: &Sample) -> Result<Vec<f64>> {
    let value = match spec {
        EstimatorSpec::SampleMean => sample_mean(s)?.value,
        EstimatorSpec::Hajek => hajek_mean(s)?.value,
        EstimatorSpec::Poststratified { drop_empty_cells } => {
            let sizes: Vec<f64> = pop.cell_sizes.iter().map(|&n| n as f64).collect();
            let policy = if *drop_empty_cells { EmptyCellPolicy::Drop } else { EmptyCellPolicy::Error };
            poststratified_mean_with(s, &sizes, policy)?.value
        }
        EstimatorSpec::DomainDifference { column } => {
            weighted_domain_difference(s, &domain_flags(&s.z, s.p, *column)?)?.value
        }
        EstimatorSpec::Ols => ols_fit(s)?.value,
        EstimatorSpec::Bw => weighted_regression_bw(s)?.value,
        EstimatorSpec::Bq { form, z_fit } => {
            let esw = estimate_esw(s, *form, *z_fit)?;
            q_weighted_regression_bq(s, &esw)?.value
        }
        EstimatorSpec::TwoStep { x_column } => {
            let r = two_step_regression(s, *x_column, &population_x_dist(pop, *x_column)?)?;
            vec![*r
                .diagnostics
                .get("contrast")
                .ok_or_else(|| Error::InvalidArgument("binary z level missing from population".into()))?]
        }
        EstimatorSpec::PredictTotal { esw } => {
            let counts = nonsample_level_counts(pop, s);
            match esw {
                None => predict_total(s, &counts, TotalMode::MethodOfMoments)?.value,
                Some(form) => {
                    let m = estimate_esw(s, *form, ZFit::Regression)?;
                    predict_total(s, &counts, TotalMode::Model(&m))?.value
                }
            }
        }
    };
    Ok(value)
}

fn draw(cfg: &ExperimentConfig, pop: &Population, rep: u64) -> Result<Sample> {
    match &cfg.design {
        Design::Census => draw_sample(pop, &vec![1.0; pop.len()], 0),
        Design::Poisson(model) => draw_respondents(
            pop,
            model,
            cfg.weight_mode,
            derive_seed(cfg.seed, rep, STREAM_SELECTION),
            derive_seed(cfg.seed, rep, STREAM_RESPONSE),
        ),
    }
}

fn replicate(cfg: &ExperimentConfig, fixed: Option<&Population>, rep: usize) -> Result<Vec<ReplicationRecord>> {
    let owned;
    let pop = match fixed {
        Some(p) => p,
        None => {
            owned = generate_population(
                &cfg.population,
                cfg.n_population,
                derive_seed(cfg.seed, rep as u64, STREAM_POPULATION),
            )?;
            &owned
        }
    };
    let sample = draw(cfg, pop, rep as u64);
    let mut truths = Truths { pop, coef: None };
    let mut out = Vec::new();
    for spec in &cfg.estimators {
        let names = spec.components(pop.p);
        let truth = truths.for_spec(spec);
        let est = sample
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|s| evaluate(spec, pop, s))
            .and_then(|v| {
                if v.len() == names.len() {
                    Ok(v)
                } else {
                    Err(Error::InvalidState(format!("{} returned {} components", spec.label(), v.len())))
                }
            });
        for (k, component) in names.into_iter().enumerate() {
            let truth_k = truth.as_ref().map(|t| t[k]).unwrap_or(f64::NAN);
            let (estimate, error) = match (&est, &truth) {
                (Ok(v), Ok(_)) => (v[k], None),
                (Err(e), _) | (_, Err(e)) => (f64::NAN, Some(e.code().to_string())),
            };
            out.push(ReplicationRecord {
                replication: rep,
                estimator: spec.label().to_string(),
                component,
                estimate,
                truth: truth_k,
                error,
            });
        }
    }
    Ok(out)
}

/// Runs every replication and summarizes each estimator component.
///
/// Replication `r` draws from streams derived from `(seed, r)` only, and the
/// summary reduces in replication order, so the report does not depend on
/// how many threads execute it.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let fixed = if cfg.fixed_population {
        Some(generate_population(
            &cfg.population,
            cfg.n_population,
            derive_seed(cfg.seed, u64::MAX, STREAM_POPULATION),
        )?)
    } else {
        None
    };

    let per_rep: Vec<Vec<ReplicationRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, fixed.as_ref(), r))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();

    let p = cfg.population.z_width();
    let mut summary = Vec::new();
    for spec in &cfg.estimators {
        for component in spec.components(p) {
            let rows: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.estimator == spec.label() && r.component == component)
                .collect();
            let ok: Vec<&&ReplicationRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.estimate - r.truth).collect();
            let s = summarize(&errors, 0.0);
            let mean = |f: &dyn Fn(&ReplicationRecord) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            summary.push(SummaryRow {
                estimator: spec.label().to_string(),
                component,
                mean_estimate: mean(&|r| r.estimate),
                mean_truth: mean(&|r| r.truth),
                bias: s.bias,
                variance: s.variance,
                mse: s.mse,
                mcse: s.mcse,
                successes: ok.len(),
                failures: rows.len() - ok.len(),
            });
        }
    }

    Ok(SimulationReport { config: cfg.clone(), records, summary })
}
