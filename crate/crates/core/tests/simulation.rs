mod common;

use common::{load_config, rng};
use rand::Rng;
use sampmodel::design::{draw_respondents, SelectionModel};
use sampmodel::montecarlo::Design;
use sampmodel::rng::derive_seed;
use sampmodel::sample_model::{estimate_esw, profile_log_likelihood};
use sampmodel::{
    generate_population, run_replications, summarize, DiscreteJointDist, EswForm, ExperimentConfig, InclusionModel,
    PiFunction, Sample, WeightMode, ZFit,
};

fn reference_design(cfg: &ExperimentConfig) -> InclusionModel {
    match &cfg.design {
        Design::Poisson(m) => m.clone(),
        Design::Census => unreachable!(),
    }
}

#[test]
fn realized_sample_size_matches_target() {
    let cfg = load_config("reference.json");
    let design = reference_design(&cfg);
    let pop = generate_population(&cfg.population, cfg.n_population, 1).unwrap();
    let sizes: Vec<f64> = (0..1000)
        .map(|r| draw_respondents(&pop, &design, WeightMode::TrueCombined, derive_seed(7, r, 1), 0).unwrap().len() as f64)
        .collect();
    let s = summarize(&sizes, design.target_n);
    assert!(s.bias.abs() <= 3.0 * s.mcse, "bias {} mcse {}", s.bias, s.mcse);
}

#[test]
fn mean_weight_matches_expansion_factor() {
    let cfg = load_config("reference.json");
    let design = reference_design(&cfg);
    let pop = generate_population(&cfg.population, cfg.n_population, 2).unwrap();
    let means: Vec<f64> = (0..500)
        .map(|r| {
            let s = draw_respondents(&pop, &design, WeightMode::TrueCombined, derive_seed(8, r, 1), 0).unwrap();
            s.w.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    let target = cfg.n_population as f64 / design.target_n;
    let s = summarize(&means, target);
    assert!(s.bias.abs() <= 3.0 * s.mcse, "bias {} mcse {}", s.bias, s.mcse);
}

#[test]
fn log_linear_weight_model_inverts_selection_slope() {
    let cfg = load_config("reference.json");
    let design = reference_design(&cfg);
    for r in 0..200 {
        let pop = generate_population(&cfg.population, cfg.n_population, derive_seed(9, r, 0)).unwrap();
        let s = draw_respondents(&pop, &design, WeightMode::TrueCombined, derive_seed(9, r, 1), 0).unwrap();
        let m = estimate_esw(&s, EswForm::LogLinear, ZFit::Regression).unwrap();
        let b_y = m.full.unwrap()[1];
        assert_eq!(b_y.signum(), -design.selection.a_y.signum(), "replication {r}: b_y = {b_y}");
    }
}

#[test]
fn ignorable_design_ols_and_bw_agree() {
    let mut cfg = load_config("reference.json");
    cfg.design = Design::Poisson(InclusionModel {
        selection: SelectionModel { a0: 0.0, a_y: 0.0, a_z: vec![0.5] },
        response: None,
        target_n: 1000.0,
    });
    let report = run_replications(&cfg).unwrap();
    for component in ["intercept", "z_1"] {
        let ols = report.row("ols", component).unwrap();
        let bw = report.row("bw", component).unwrap();
        let tol = 3.0 * (ols.mcse.powi(2) + bw.mcse.powi(2)).sqrt();
        assert!((ols.bias - bw.bias).abs() <= tol, "{component}: {} vs {}", ols.bias, bw.bias);
        assert!(ols.bias.abs() <= 3.0 * ols.mcse, "{component}: ols bias {}", ols.bias);
    }
}

#[test]
fn informative_selection_shifts_only_the_ols_intercept() {
    let report = run_replications(&load_config("reference.json")).unwrap();
    let slope = report.row("ols", "z_1").unwrap();
    let intercept = report.row("ols", "intercept").unwrap();
    assert!(slope.bias.abs() <= 3.0 * slope.mcse, "slope bias {}", slope.bias);
    // N(1 + z, 1) tilted by exp(a_y y) is N(1 + z + a_y, 1)
    assert!((intercept.bias - 0.5).abs() <= 4.0 * intercept.mcse + 0.01, "intercept bias {}", intercept.bias);
}

#[test]
fn report_is_independent_of_thread_count() {
    let mut cfg = load_config("reference_discrete.json");
    cfg.replications = 60;
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replications(&cfg).unwrap())
    };
    let one = run_with(1);
    let four = run_with(4);
    let csv = |r: &sampmodel::SimulationReport| {
        let mut a = Vec::new();
        r.write_replications_csv(&mut a).unwrap();
        r.write_summary_csv(&mut a).unwrap();
        a
    };
    assert_eq!(csv(&one), csv(&four));
}

#[test]
fn same_seed_same_report_different_seed_different_report() {
    let mut cfg = load_config("nmar.json");
    cfg.replications = 40;
    let a = run_replications(&cfg).unwrap();
    let b = run_replications(&cfg).unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    let c = run_replications(&cfg).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn census_has_zero_error() {
    let report = run_replications(&load_config("census.json")).unwrap();
    for row in &report.summary {
        if row.estimator == "sample_mean" || row.estimator == "hajek" || row.estimator == "ols" || row.estimator == "bw" {
            assert!(row.bias.abs() < 1e-12, "{} {}: {}", row.estimator, row.component, row.bias);
        } else {
            assert!(row.bias.abs() < 1e-9, "{} {}: {}", row.estimator, row.component, row.bias);
        }
        assert_eq!(row.failures, 0);
    }
}

#[test]
fn likelihood_grid_search_recovers_population_probability() {
    let truth = 0.4;
    let pi = PiFunction::new(vec![vec![0.3], vec![0.7]]).unwrap();
    let mut g = rng(11);
    let n = 5_000;
    let y_all: Vec<f64> = (0..n).map(|_| f64::from(g.random_bool(truth))).collect();
    let mut ids = Vec::new();
    for (i, y) in y_all.iter().enumerate() {
        if g.random_bool(pi.values[*y as usize][0]) {
            ids.push(i);
        }
    }
    let y: Vec<f64> = ids.iter().map(|&i| y_all[i]).collect();
    let k = ids.len();
    let mut s = Sample::from_columns(y, vec![0.0; k], 1, vec![1.0; k], vec![0; k]).unwrap();
    s.unit_ids = ids;
    let z_all = vec![vec![0.0]; n];

    let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let profile = profile_log_likelihood(
        &grid,
        |theta| {
            let fp = DiscreteJointDist::new(vec![0.0, 1.0], vec![vec![0.0]], vec![vec![1.0 - theta], vec![theta]])?;
            Ok((fp, pi.clone()))
        },
        &s,
        &z_all,
    )
    .unwrap();
    assert!((profile.best_param - truth).abs() <= 0.03, "argmax {}", profile.best_param);
    // the sample proportion is biased upward under this design
    let naive = s.y.iter().sum::<f64>() / k as f64;
    assert!(naive - truth > 0.15, "naive {naive}");
}
