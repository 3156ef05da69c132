#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sampmodel::{DiscreteJointDist, ExperimentConfig, PiFunction};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_path(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Random `(f_p, π)` instance with supports up to `max_y` x `max_z` and π in [lo, hi].
pub fn random_instance(rng: &mut ChaCha8Rng, max_y: usize, max_z: usize, lo: f64, hi: f64) -> (DiscreteJointDist, PiFunction) {
    let ny = rng.random_range(1..=max_y);
    let nz = rng.random_range(1..=max_z);
    let raw: Vec<Vec<f64>> = (0..ny).map(|_| (0..nz).map(|_| rng.random_range(0.01..1.0)).collect()).collect();
    let total: f64 = raw.iter().flatten().sum();
    let p: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().map(|v| v / total).collect()).collect();
    let y_support = (0..ny).map(|i| i as f64).collect();
    let z_support = (0..nz).map(|j| vec![j as f64]).collect();
    let pi = (0..ny).map(|_| (0..nz).map(|_| rng.random_range(lo..=hi)).collect()).collect();
    (
        DiscreteJointDist::new(y_support, z_support, p).unwrap(),
        PiFunction::new(pi).unwrap(),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
