#![allow(dead_code)]

use miskrige::experiments::StudyConfig;
use miskrige::geometry::{make_design, DesignKind, DesignSet, Region};
use miskrige::linalg::Dense;
use nalgebra::DMatrix;

pub fn config(name: &str) -> StudyConfig {
    let path = format!("{}/../../configs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    StudyConfig::from_json(&text).unwrap()
}

/// Smallest singular value from nalgebra's SVD.
pub fn min_singular_value(k: &Dense) -> f64 {
    let m = DMatrix::from_fn(k.n, k.n, |i, j| k.get(i, j));
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn jittered(n: usize, a: f64, b: f64, seed: u64) -> DesignSet {
    make_design(DesignKind::JitteredGrid, n, &Region::interval(a, b).unwrap(), seed).unwrap()
}
