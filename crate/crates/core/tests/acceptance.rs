//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::Instant;

use common::{load_config, random_instance, rng};
use rand::Rng;
use sampmodel::design::{draw_respondents, SelectionModel};
use sampmodel::montecarlo::{run_replications, Design, SimulationReport};
use sampmodel::sample_model::{
    full_log_likelihood, identity_residuals, nonsample_level_counts, predict_total, TotalMode,
};
use sampmodel::{
    generate_population, hajek_mean, weighted_domain_difference, weighted_regression_bw, DiscreteJointDist,
    InclusionModel, PiFunction, PopulationModel, Sample, WeightMode,
};

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn check(id: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn run(name: &str, mode: Option<WeightMode>) -> (SimulationReport, f64) {
    let mut cfg = load_config(name);
    if let Some(m) = mode {
        cfg.weight_mode = m;
    }
    let t = Instant::now();
    let report = run_replications(&cfg).unwrap();
    (report, t.elapsed().as_secs_f64())
}

fn ac1_exact_identities() -> Vec<Outcome> {
    let mut g = rng(1);
    let instances: Vec<_> = (0..100).map(|_| random_instance(&mut g, 8, 4, 0.05, 0.95)).collect();
    let t = Instant::now();
    let (mut rt, mut dual, mut mix) = (0f64, 0f64, 0f64);
    for (fp, pi) in &instances {
        let r = identity_residuals(fp, pi, 1e-12).unwrap();
        rt = rt.max(r.round_trip);
        dual = dual.max(r.dual_form);
        mix = mix.max(r.mixture);
    }
    let secs = t.elapsed().as_secs_f64();
    vec![
        check("AC1a round-trip f_s -> f_p", rt < 1e-10, format!("max error {rt:.3e} < 1e-10")),
        check("AC1b complement dual-form", dual < 1e-10, format!("max gap {dual:.3e} < 1e-10")),
        check("AC1c mixture identity", mix < 1e-12, format!("max error {mix:.3e} < 1e-12")),
        check("AC1d identity suite runtime", secs < 1.0, format!("{secs:.4} s < 1 s")),
    ]
}

fn ac2_ignorable_fixed_point() -> Outcome {
    let mut g = rng(2);
    let mut worst = 0f64;
    let mut all_flagged = true;
    for _ in 0..100 {
        let (fp, pi) = random_instance(&mut g, 8, 4, 0.05, 0.95);
        // keep one π per z column
        let row0 = pi.values[0].clone();
        let z_only = PiFunction::new(vec![row0; fp.ny()]).unwrap();
        let r = identity_residuals(&fp, &z_only, 1e-12).unwrap();
        all_flagged &= r.ignorable;
        worst = worst.max(r.sample_vs_population).max(r.complement_vs_population);
    }
    check(
        "AC2 ignorable fixed point",
        worst <= 1e-12 && all_flagged,
        format!("max |f_s - f_p|, |f_c - f_p| = {worst:.3e} <= 1e-12; ignorable flagged: {all_flagged}"),
    )
}

fn ac3_reference(report: &SimulationReport, secs: f64) -> Vec<Outcome> {
    let ols = report.row("ols", "z_1").unwrap();
    let bw = report.row("bw", "z_1").unwrap();
    let hajek = report.row("hajek", "mean").unwrap();
    let naive = report.row("sample_mean", "mean").unwrap();
    vec![
        check(
            "AC3a OLS slope bias >= 5 x b_w slope bias",
            ols.bias.abs() >= 5.0 * bw.bias.abs(),
            format!("|{:.3e}| vs 5 x |{:.3e}|", ols.bias, bw.bias),
        ),
        check(
            "AC3b b_w slope bias within 3 mcse",
            bw.bias.abs() <= 3.0 * bw.mcse,
            format!("|{:.3e}| <= 3 x {:.3e}", bw.bias, bw.mcse),
        ),
        check(
            "AC3c Hajek mean bias within 3 mcse",
            hajek.bias.abs() <= 3.0 * hajek.mcse,
            format!("|{:.3e}| <= 3 x {:.3e}", hajek.bias, hajek.mcse),
        ),
        check(
            "AC3d unweighted mean bias > 10 mcse",
            naive.bias.abs() > 10.0 * naive.mcse,
            format!("|{:.3e}| > 10 x {:.3e}", naive.bias, naive.mcse),
        ),
        check("AC3e reference runtime", secs < 60.0, format!("{secs:.2} s < 60 s")),
    ]
}

fn ac4_bq_efficiency(report: &SimulationReport) -> Outcome {
    let bq = report.row("bq", "z_1").unwrap();
    let bw = report.row("bw", "z_1").unwrap();
    check(
        "AC4 var(b_q slope) <= 1.05 var(b_w slope)",
        bq.variance <= 1.05 * bw.variance && bq.failures == 0,
        format!("{:.4e} <= 1.05 x {:.4e}", bq.variance, bw.variance),
    )
}

fn ac5_total_predictor(report: &SimulationReport) -> Vec<Outcome> {
    let row = report.row("predict_total", "total").unwrap();
    let rel = row.bias.abs() / row.mean_truth.abs();

    // equal-probability design with a single z level: constant weights N / n
    let model = PopulationModel { beta: vec![1.0], sigma_eps: 1.0, covariates: vec![], cells: vec![] };
    let design = InclusionModel {
        selection: SelectionModel { a0: 0.0, a_y: 0.0, a_z: vec![] },
        response: None,
        target_n: 1000.0,
    };
    let mut worst = 0f64;
    for seed in 0..20 {
        let pop = generate_population(&model, 20_000, seed).unwrap();
        let s = draw_respondents(&pop, &design, WeightMode::TrueCombined, 100 + seed, 200 + seed).unwrap();
        let counts = nonsample_level_counts(&pop, &s);
        let total = predict_total(&s, &counts, TotalMode::MethodOfMoments).unwrap().scalar();
        let expansion = pop.len() as f64 * hajek_mean(&s).unwrap().scalar();
        worst = worst.max(((total - expansion) / expansion).abs());
    }
    vec![
        check("AC5a predict_total relative bias < 1%", rel < 0.01, format!("{:.3e} < 1e-2", rel)),
        check(
            "AC5b constant weights give N x Hajek mean",
            worst < 1e-12,
            format!("max relative gap {worst:.3e} < 1e-12"),
        ),
    ]
}

fn ac6_rescaling() -> Outcome {
    let cfg = load_config("reference.json");
    let Design::Poisson(design) = &cfg.design else { unreachable!() };
    let mut g = rng(6);
    let mut worst = 0f64;
    for k in 0..50 {
        let pop = generate_population(&cfg.population, 5_000, g.random()).unwrap();
        let design = InclusionModel { target_n: g.random_range(50.0..500.0), ..design.clone() };
        let s = draw_respondents(&pop, &design, WeightMode::TrueCombined, g.random(), k).unwrap();
        let domain: Vec<bool> = s.z.iter().map(|z| *z > 0.0).collect();
        let base = (
            hajek_mean(&s).unwrap().scalar(),
            weighted_regression_bw(&s).unwrap().value,
            weighted_domain_difference(&s, &domain).unwrap().scalar(),
        );
        for c in [0.1, 7.0, 1000.0] {
            let r: Sample = s.rescaled(c);
            worst = worst.max((hajek_mean(&r).unwrap().scalar() - base.0).abs());
            for (a, b) in weighted_regression_bw(&r).unwrap().value.iter().zip(&base.1) {
                worst = worst.max((a - b).abs());
            }
            worst = worst.max((weighted_domain_difference(&r, &domain).unwrap().scalar() - base.2).abs());
        }
    }
    check("AC6 weight-rescaling invariance", worst < 1e-10, format!("max change {worst:.3e} < 1e-10"))
}

fn ac7_mse_decomposition(reports: &[&SimulationReport]) -> Outcome {
    let mut worst = 0f64;
    let mut rows = 0;
    for report in reports {
        for row in &report.summary {
            let r = row.successes as f64;
            let var_r = if row.successes > 1 { row.variance * (r - 1.0) / r } else { 0.0 };
            let rebuilt = row.bias * row.bias + var_r;
            let rel = (row.mse - rebuilt).abs() / row.mse.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(if row.mse == 0.0 && rebuilt == 0.0 { 0.0 } else { rel });
            rows += 1;
        }
    }
    check(
        "AC7 mse = bias^2 + variance (1/R)",
        worst <= 1e-9,
        format!("{rows} rows, max relative gap {worst:.3e} <= 1e-9"),
    )
}

fn ac8_misspecified(selection_only: &SimulationReport, combined: &SimulationReport) -> Vec<Outcome> {
    let bad = selection_only.row("hajek", "mean").unwrap();
    let good = combined.row("hajek", "mean").unwrap();
    vec![
        check(
            "AC8a NMAR, selection-only weights: Hajek bias > 10 mcse",
            bad.bias.abs() > 10.0 * bad.mcse,
            format!("|{:.3e}| > 10 x {:.3e}", bad.bias, bad.mcse),
        ),
        check(
            "AC8b NMAR, true combined weights: Hajek bias within 3 mcse",
            good.bias.abs() <= 3.0 * good.mcse,
            format!("|{:.3e}| <= 3 x {:.3e}", good.bias, good.mcse),
        ),
    ]
}

fn ac9_full_likelihood() -> Outcome {
    // y in {0, 1}, z in {0, 1}; units 0 and 2 sampled, unit 1 not
    let fp = DiscreteJointDist::new(
        vec![0.0, 1.0],
        vec![vec![0.0], vec![1.0]],
        vec![vec![0.2, 0.15], vec![0.3, 0.35]],
    )
    .unwrap();
    let pi = PiFunction::new(vec![vec![0.3, 0.5], vec![0.6, 0.9]]).unwrap();
    let z_all = vec![vec![0.0], vec![1.0], vec![1.0]];
    let mut s = Sample::from_columns(vec![1.0, 0.0], vec![0.0, 1.0], 1, vec![1.0; 2], vec![0; 2]).unwrap();
    s.unit_ids = vec![0, 2];

    // f_p(y|z=0) = (0.4, 0.6), f_p(y|z=1) = (0.3, 0.7); Pr(s|z=1) = 0.5*0.3 + 0.9*0.7
    let unit0: f64 = 0.6 * 0.6;
    let unit2 = 0.5 * 0.3;
    let unit1 = 1.0 - (0.5 * 0.3 + 0.9 * 0.7);
    let oracle = (unit0 * unit1 * unit2).ln();
    let got = full_log_likelihood(&fp, &pi, &s, &z_all).unwrap().value;
    check(
        "AC9 full likelihood vs product oracle",
        (got - oracle).abs() < 1e-12,
        format!("{got:.15} vs {oracle:.15}"),
    )
}

fn main() {
    let (reference, ref_secs) = run("reference.json", None);
    let (discrete, _) = run("reference_discrete.json", None);
    let (nmar_sel, _) = run("nmar.json", Some(WeightMode::SelectionOnly));
    let (nmar_true, _) = run("nmar.json", Some(WeightMode::TrueCombined));

    let mut outcomes = ac1_exact_identities();
    outcomes.push(ac2_ignorable_fixed_point());
    outcomes.extend(ac3_reference(&reference, ref_secs));
    outcomes.push(ac4_bq_efficiency(&discrete));
    outcomes.extend(ac5_total_predictor(&discrete));
    outcomes.push(ac6_rescaling());
    outcomes.push(ac7_mse_decomposition(&[&reference, &discrete, &nmar_sel, &nmar_true]));
    outcomes.extend(ac8_misspecified(&nmar_sel, &nmar_true));
    outcomes.push(ac9_full_likelihood());

    let mut failed = 0;
    for o in &outcomes {
        println!("[{}] {:<55} {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
