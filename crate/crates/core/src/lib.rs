//! Estimation under informative sampling and nonresponse.
//!
//! * [`population`] generates finite populations from a linear model with
//!   discrete poststratification cells.
//! * [`design`] computes calibrated inclusion probabilities, draws Poisson
//!   samples and applies a response stage.
//! * [`estimators`] holds the Hájek, poststratified, domain-difference,
//!   OLS, `b_w`, `b_q` and two-step estimators.
//! * [`sample_model`] is the exact engine for the sample and
//!   sample-complement distributions plus the weight-expectation models, the
//!   total predictor and the full likelihood.
//! * [`montecarlo`] runs replicated experiments and summarizes bias,
//!   variance and MSE.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod montecarlo;
pub mod population;
pub mod rng;
pub mod sample_model;

pub use design::{
    apply_response, compute_inclusion_probs, draw_respondents, draw_sample, inclusion_components,
    InclusionModel, InclusionProbs, ResponseModel, Sample, SelectionModel, WeightMode,
};
pub use error::{Error, Result};
pub use estimators::{
    hajek_mean, ols_fit, poststratified_mean, poststratified_mean_with, q_weighted_regression_bq,
    sample_mean, two_step_regression, weighted_domain_difference, weighted_regression_bw, EmptyCellPolicy,
    EstimatorResult, XDistRow,
};
pub use montecarlo::{run_replications, summarize, EstimatorSpec, ExperimentConfig, SimulationReport, Summary};
pub use population::{cell_structure, generate_population, CovariateSpec, Population, PopulationModel};
pub use sample_model::{DiscreteJointDist, EswForm, EswModel, PiFunction, ZFit};
