//! Command-line front end: `simulate`, `exact`, `estimate` and `draw`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::design::WeightMode;
use crate::estimators::{
    hajek_mean, ols_fit, poststratified_mean, q_weighted_regression_bq, sample_mean, two_step_regression,
    weighted_domain_difference, weighted_regression_bw, EstimatorResult, XDistRow,
};
use crate::io::{read_sample_csv, write_population_csv, write_results_csv, write_sample_csv, SampleTable};
use crate::montecarlo::{run_replications, Design, EstimatorSpec, ExperimentConfig};
use crate::population::generate_population;
use crate::rng::derive_seed;
use crate::sample_model::{
    estimate_esw, identity_residuals, predict_total, DiscreteJointDist, EswForm, LevelCount, PiFunction,
    TotalMode, ZFit,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_RESIDUAL: i32 = 4;

/// Largest identity residual accepted by `exact`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SAMPMODEL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sampmodel", version, about = "Estimation under informative sampling and nonresponse")]
pub struct Cli {
    /// Print progress to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a replicated experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Check the exact distribution identities on a discrete (y, z) table.
    Exact(ExactArgs),
    /// Run estimators on a sample CSV.
    Estimate(EstimateArgs),
    /// Write one population and one sample drawn from an experiment config.
    Draw(DrawArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated estimator names; keeps matching config entries, default options otherwise.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    /// `true` (combined selection x response) or `selection-only`.
    #[arg(long)]
    pub weight_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sample CSV with columns y, w, z_* and optional cell_id, domain, x.
    #[arg(long, alias = "config")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "hajek")]
    pub estimators: Vec<String>,
    /// CSV with columns cell_id, size (for poststratified).
    #[arg(long)]
    pub cell_sizes: Option<PathBuf>,
    /// JSON list of {"level": [...], "probs": [p0, p1]} (for two_step).
    #[arg(long)]
    pub x_dist: Option<PathBuf>,
    /// CSV with the sample's z columns plus count (for predict_total).
    #[arg(long)]
    pub nonsample_counts: Option<PathBuf>,
    #[arg(long, default_value = "log-linear")]
    pub esw_form: String,
    /// `regression` or `saturated`.
    #[arg(long, default_value = "regression")]
    pub esw_z_fit: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DrawArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Replication whose streams are used.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let verbose = cli.verbose > 0;
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, verbose),
        Command::Exact(a) => cmd_exact(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Draw(a) => cmd_draw(&a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::input(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

/// Loads an experiment config and applies command-line overrides.
pub fn load_experiment(
    path: &Path,
    seed: Option<u64>,
    reps: Option<usize>,
    estimators: Option<&[String]>,
    weight_mode: Option<&str>,
) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = parse_json(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(names) = estimators {
        let mut specs = Vec::with_capacity(names.len());
        for name in names {
            let name = name.trim();
            let spec = match cfg.estimators.iter().find(|s| s.label() == name) {
                Some(s) => s.clone(),
                None => EstimatorSpec::from_name(name).map_err(|e| CliError::input(e.to_string()))?,
            };
            specs.push(spec);
        }
        cfg.estimators = specs;
    }
    if let Some(m) = weight_mode {
        cfg.weight_mode = m.parse::<WeightMode>().map_err(|e| CliError::input(e.to_string()))?;
    }
    cfg.validate()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn thread_pool() -> CliResult<Option<rayon::ThreadPool>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(Some)
                .map_err(|e| CliError::runtime(e.to_string()))
        }
        Err(_) => Ok(None),
    }
}

pub fn cmd_simulate(a: &SimulateArgs, verbose: bool) -> CliResult<i32> {
    let cfg = load_experiment(
        &a.config,
        a.seed,
        a.reps,
        a.estimators.as_deref(),
        a.weight_mode.as_deref(),
    )?;
    if verbose {
        eprintln!("running {} replications of {} estimators", cfg.replications, cfg.estimators.len());
    }
    let report = match thread_pool()? {
        Some(pool) => pool.install(|| run_replications(&cfg)),
        None => run_replications(&cfg),
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;

    ensure_dir(&a.out)?;
    let io_err = |e: csv::Error| CliError::runtime(e.to_string());
    report.write_replications_csv(create(&a.out.join("replications.csv"))?).map_err(io_err)?;
    report.write_summary_csv(create(&a.out.join("summary.csv"))?).map_err(io_err)?;
    let mut echo = create(&a.out.join("config.json"))?;
    serde_json::to_writer_pretty(&mut echo, &cfg).map_err(|e| CliError::runtime(e.to_string()))?;
    echo.flush().map_err(|e| CliError::runtime(e.to_string()))?;
    if verbose {
        for row in &report.summary {
            eprintln!(
                "{:>18} {:>10}  bias {:+.5e}  mcse {:.3e}  failures {}",
                row.estimator, row.component, row.bias, row.mcse, row.failures
            );
        }
    }
    Ok(EXIT_OK)
}

/// Input of the `exact` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactInput {
    pub y_support: Vec<f64>,
    pub z_support: Vec<Vec<f64>>,
    /// `p[y][z]`.
    pub p: Vec<Vec<f64>>,
    /// `pi[y][z]`.
    pub pi: Vec<Vec<f64>>,
    /// Ignorability tolerance.
    #[serde(default = "default_ignorability_tol")]
    pub tolerance: f64,
}

fn default_ignorability_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactOutput {
    pub passed: bool,
    pub residual_tolerance: f64,
    pub residuals: Residuals,
    pub ignorable: bool,
    pub sample_pdf: Vec<Vec<f64>>,
    pub sample_conditional: Vec<Vec<f64>>,
    pub complement_pdf: Vec<Vec<f64>>,
    pub complement_conditional: Vec<Vec<f64>>,
    pub selection_propensity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub normalization: f64,
    pub round_trip: f64,
    pub dual_form: f64,
    pub mixture: f64,
}

pub fn exact_report(input: &ExactInput) -> crate::Result<ExactOutput> {
    let fp = DiscreteJointDist::new(input.y_support.clone(), input.z_support.clone(), input.p.clone())?;
    let pi = PiFunction::new(input.pi.clone())?;
    let r = identity_residuals(&fp, &pi, input.tolerance)?;
    Ok(ExactOutput {
        passed: r.max_residual() < RESIDUAL_TOL,
        residual_tolerance: RESIDUAL_TOL,
        residuals: Residuals {
            normalization: r.normalization,
            round_trip: r.round_trip,
            dual_form: r.dual_form,
            mixture: r.mixture,
        },
        ignorable: r.ignorable,
        sample_conditional: r.sample_pdf.conditional_table(),
        sample_pdf: r.sample_pdf.p,
        complement_conditional: r.complement_pdf.conditional_table(),
        complement_pdf: r.complement_pdf.p,
        selection_propensity: r.selection_propensity,
    })
}

pub fn cmd_exact(a: &ExactArgs) -> CliResult<i32> {
    let input: ExactInput = parse_json(&a.config)?;
    let report = exact_report(&input).map_err(|e| CliError::input(format!("{}: {e}", a.config.display())))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        fs::write(dir.join("exact_report.json"), &text).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_RESIDUAL })
}

fn read_cell_sizes(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::input(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::input(format!("{}: missing required column {name:?}", path.display())))
    };
    let (ci, si) = (col("cell_id")?, col("size")?);
    let mut sizes: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(e.to_string()))?;
        let cell: usize = rec[ci].trim().parse().map_err(|_| CliError::input(format!("bad cell_id {:?}", &rec[ci])))?;
        let size: f64 = rec[si].trim().parse().map_err(|_| CliError::input(format!("bad size {:?}", &rec[si])))?;
        if sizes.len() <= cell {
            sizes.resize(cell + 1, 0.0);
        }
        sizes[cell] = size;
    }
    Ok(sizes)
}

fn read_level_counts(path: &Path, table: &SampleTable) -> CliResult<Vec<LevelCount>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::input(e.to_string()))?.clone();
    let count_idx = headers
        .iter()
        .position(|h| h.trim() == "count")
        .ok_or_else(|| CliError::input(format!("{}: missing required column \"count\"", path.display())))?;
    let mut z_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.trim().strip_prefix("z_").and_then(|k| k.parse::<usize>().ok()).map(|k| (k, i)))
        .collect();
    z_cols.sort();
    let mut idx: Vec<usize> = z_cols.into_iter().map(|(_, i)| i).collect();
    if table.x_col.is_some() {
        idx.push(
            headers
                .iter()
                .position(|h| h.trim() == "x")
                .ok_or_else(|| CliError::input(format!("{}: missing required column \"x\"", path.display())))?,
        );
    }
    if idx.len() != table.sample.p {
        return Err(CliError::input(format!(
            "{}: {} covariate columns, sample has {}",
            path.display(),
            idx.len(),
            table.sample.p
        )));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::input(format!("bad number {s:?}")));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(e.to_string()))?;
        let level = idx.iter().map(|&i| num(&rec[i])).collect::<CliResult<Vec<f64>>>()?;
        out.push(LevelCount { level, count: num(&rec[count_idx])? });
    }
    Ok(out)
}

fn parse_form(s: &str) -> CliResult<EswForm> {
    match s {
        "linear" => Ok(EswForm::Linear),
        "log-linear" => Ok(EswForm::LogLinear),
        other => Err(CliError::input(format!("unknown weight-model form {other:?}"))),
    }
}

fn parse_z_fit(s: &str) -> CliResult<ZFit> {
    match s {
        "regression" => Ok(ZFit::Regression),
        "saturated" => Ok(ZFit::Saturated),
        other => Err(CliError::input(format!("unknown z fit {other:?}"))),
    }
}

const WEIGHTED: &[&str] = &["hajek", "domain_difference", "bw", "bq", "predict_total"];
const KNOWN: &[&str] = &[
    "sample_mean",
    "hajek",
    "poststratified",
    "domain_difference",
    "ols",
    "bw",
    "bq",
    "two_step",
    "predict_total",
];

pub fn cmd_estimate(a: &EstimateArgs) -> CliResult<i32> {
    let file = File::open(&a.input).map_err(|e| CliError::input(format!("{}: {e}", a.input.display())))?;
    let table = read_sample_csv(file).map_err(|e| CliError::input(format!("{}: {e}", a.input.display())))?;
    let names: Vec<&str> = a.estimators.iter().map(|s| s.trim()).collect();
    let form = parse_form(&a.esw_form)?;
    let z_fit = parse_z_fit(&a.esw_z_fit)?;

    // resolve every required input before running anything
    for name in &names {
        if !KNOWN.contains(name) {
            return Err(CliError::input(format!("unknown estimator {name:?}")));
        }
        if WEIGHTED.contains(name) && !table.has_weights {
            return Err(CliError::input(format!("missing required column \"w\" for {name}")));
        }
    }
    let needs = |n: &str| names.contains(&n);
    let domain = if needs("domain_difference") {
        Some(table.domain.clone().ok_or_else(|| CliError::input("missing required column \"domain\""))?)
    } else {
        None
    };
    let cell_sizes = if needs("poststratified") {
        let path = a.cell_sizes.as_ref().ok_or_else(|| CliError::input("poststratified needs --cell-sizes"))?;
        Some(read_cell_sizes(path)?)
    } else {
        None
    };
    let two_step = if needs("two_step") {
        let x_col = table.x_col.ok_or_else(|| CliError::input("missing required column \"x\""))?;
        let path = a.x_dist.as_ref().ok_or_else(|| CliError::input("two_step needs --x-dist"))?;
        Some((x_col, parse_json::<Vec<XDistRow>>(path)?))
    } else {
        None
    };
    let counts = if needs("predict_total") {
        let path = a.nonsample_counts.as_ref().ok_or_else(|| CliError::input("predict_total needs --nonsample-counts"))?;
        Some(read_level_counts(path, &table)?)
    } else {
        None
    };

    let s = &table.sample;
    let rows: Vec<(String, crate::Result<EstimatorResult>)> = names
        .iter()
        .map(|&name| {
            let res = match name {
                "sample_mean" => sample_mean(s),
                "hajek" => hajek_mean(s),
                "poststratified" => poststratified_mean(s, cell_sizes.as_deref().unwrap_or_default()),
                "domain_difference" => weighted_domain_difference(s, domain.as_deref().unwrap_or_default()),
                "ols" => ols_fit(s),
                "bw" => weighted_regression_bw(s),
                "bq" => estimate_esw(s, form, z_fit).and_then(|m| q_weighted_regression_bq(s, &m)),
                "two_step" => {
                    let (x_col, dist) = two_step.as_ref().expect("resolved above");
                    two_step_regression(s, *x_col, dist)
                }
                "predict_total" => predict_total(s, counts.as_deref().unwrap_or_default(), TotalMode::MethodOfMoments),
                _ => unreachable!("validated above"),
            };
            (name.to_string(), res)
        })
        .collect();

    let mut buf = Vec::new();
    write_results_csv(&rows, &mut buf).map_err(|e| CliError::runtime(e.to_string()))?;
    io::stdout().write_all(&buf).map_err(|e| CliError::runtime(e.to_string()))?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        fs::write(dir.join("estimates.csv"), &buf).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_draw(a: &DrawArgs) -> CliResult<i32> {
    let cfg = load_experiment(&a.config, a.seed, None, None, None)?;
    let pop = generate_population(&cfg.population, cfg.n_population, derive_seed(cfg.seed, a.replication, 0))
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let sample = match &cfg.design {
        Design::Census => crate::design::draw_sample(&pop, &vec![1.0; pop.len()], 0),
        Design::Poisson(m) => crate::design::draw_respondents(
            &pop,
            m,
            cfg.weight_mode,
            derive_seed(cfg.seed, a.replication, 1),
            derive_seed(cfg.seed, a.replication, 2),
        ),
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;
    ensure_dir(&a.out)?;
    let io_err = |e: csv::Error| CliError::runtime(e.to_string());
    write_population_csv(&pop, create(&a.out.join("population.csv"))?).map_err(io_err)?;
    write_sample_csv(&sample, create(&a.out.join("sample.csv"))?).map_err(io_err)?;
    Ok(EXIT_OK)
}
