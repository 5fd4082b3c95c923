//! Error norms by quadrature and log-log rate fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Region;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("quadrature resolution {got} is invalid: {rule}")]
    BadResolution { got: usize, rule: &'static str },
    #[error("rate fit needs at least 4 usable points (got {0})")]
    TooFewPoints(usize),
    #[error("rate fit needs strictly increasing n (violated at n = {0})")]
    NotIncreasing(f64),
}

/// Errors below this are treated as solver noise and left out of rate fits.
pub const ERROR_FLOOR: f64 = 1e-10;

/// Default quadrature resolution per axis.
pub fn default_quadrature(d: usize) -> usize {
    if d == 1 {
        10_001
    } else {
        201
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub l2: f64,
    pub linf: f64,
    pub resolution: usize,
}

/// Nodes and weights of a composite Simpson rule on Ω (tensor rule in 2D).
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn simpson_1d(a: f64, b: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / (m - 1) as f64;
    let x = (0..m).map(|i| a + h * i as f64).collect();
    let w = (0..m)
        .map(|i| {
            let c = if i == 0 || i == m - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (x, w)
}

impl Quadrature {
    pub fn simpson(region: &Region, m: usize) -> Result<Self, AnalysisError> {
        let d = region.dim();
        let min = if d == 1 { 1001 } else { 201 };
        if m < min {
            return Err(AnalysisError::BadResolution {
                got: m,
                rule: if d == 1 { "need at least 1001 points" } else { "need at least 201 points per axis" },
            });
        }
        if m % 2 == 0 {
            return Err(AnalysisError::BadResolution { got: m, rule: "Simpson needs an odd point count" });
        }
        let (x0, w0) = simpson_1d(region.lower[0], region.upper[0], m);
        if d == 1 {
            return Ok(Self { nodes: x0.into_iter().map(|x| vec![x]).collect(), weights: w0 });
        }
        let (x1, w1) = simpson_1d(region.lower[1], region.upper[1], m);
        let mut nodes = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (xa, wa) in x0.iter().zip(&w0) {
            for (xb, wb) in x1.iter().zip(&w1) {
                nodes.push(vec![*xa, *xb]);
                weights.push(wa * wb);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// √(Σ wᵢ eᵢ²) for precomputed pointwise errors.
    pub fn l2_norm(&self, errors: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(errors)
            .map(|(w, e)| w * e * e)
            .sum::<f64>()
            .sqrt()
    }
}

/// Uniform grid of M points per axis inset by half a step from ∂Ω.
pub fn inset_grid(region: &Region, m: usize) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let d = region.dim();
    let min = if d == 1 { 1000 } else { 100 };
    if m < min {
        return Err(AnalysisError::BadResolution {
            got: m,
            rule: if d == 1 { "need at least 1000 points" } else { "need at least 100 points per axis" },
        });
    }
    let axis = |k: usize| -> Vec<f64> {
        let (a, b) = (region.lower[k], region.upper[k]);
        (0..m).map(|j| a + (j as f64 + 0.5) * (b - a) / m as f64).collect()
    };
    let g0 = axis(0);
    if d == 1 {
        return Ok(g0.into_iter().map(|x| vec![x]).collect());
    }
    let g1 = axis(1);
    Ok(g0
        .iter()
        .flat_map(|x| g1.iter().map(move |y| vec![*x, *y]))
        .collect())
}

pub fn l2_error<F, G>(f: F, g: G, region: &Region, m: usize) -> Result<f64, AnalysisError>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    let q = Quadrature::simpson(region, m)?;
    let e: Vec<f64> = q.nodes.par_iter().map(|x| f(x) - g(x)).collect();
    Ok(q.l2_norm(&e))
}

pub fn linf_error<F, G>(f: F, g: G, region: &Region, m: usize) -> Result<f64, AnalysisError>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    let grid = inset_grid(region, m)?;
    Ok(grid
        .par_iter()
        .map(|x| (f(x) - g(x)).abs())
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub excluded: Vec<(f64, f64)>,
}

/// Least squares fit of log(error) = slope·log(n) + intercept.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit, AnalysisError> {
    for w in pairs.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(AnalysisError::NotIncreasing(w[1].0));
        }
    }
    let (points, excluded): (Vec<_>, Vec<_>) =
        pairs.iter().copied().partition(|&(_, e)| e >= ERROR_FLOOR && e.is_finite());
    if !excluded.is_empty() {
        log::warn!("{} points below the error floor {ERROR_FLOOR:e} left out of the rate fit", excluded.len());
    }
    if points.len() < 4 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * k * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit { slope, intercept, r_squared, points, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> Region {
        Region::unit(1).unwrap()
    }

    #[test]
    fn zero_and_unit_l2() {
        let f = |x: &[f64]| (3.0 * x[0]).sin();
        assert_eq!(l2_error(f, f, &unit(), 1001).unwrap(), 0.0);
        assert!((l2_error(|_: &[f64]| 1.0, |_: &[f64]| 0.0, &unit(), 1001).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sine_l2() {
        let v = l2_error(|x: &[f64]| (2.0 * PI * x[0]).sin(), |_: &[f64]| 0.0, &unit(), 10_001).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn cubic_exact() {
        let v = l2_error(|x: &[f64]| x[0] * x[0], |_: &[f64]| 0.0, &Region::interval(0.0, 2.0).unwrap(), 1001).unwrap();
        let want = (32.0f64 / 5.0).sqrt();
        assert!((v - want).abs() < 1e-7);
        let q = Quadrature::simpson(&unit(), 1001).unwrap();
        let integral: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x[0].powi(3)).sum();
        assert!((integral - 0.25).abs() < 1e-14);
    }

    #[test]
    fn even_resolution_rejected() {
        assert!(matches!(Quadrature::simpson(&unit(), 1002), Err(AnalysisError::BadResolution { .. })));
        assert!(matches!(Quadrature::simpson(&unit(), 999), Err(AnalysisError::BadResolution { .. })));
    }

    #[test]
    fn tensor_simpson() {
        let r = Region::unit(2).unwrap();
        let v = l2_error(|x: &[f64]| x[0] * x[1], |_: &[f64]| 0.0, &r, 201).unwrap();
        assert!((v - (1.0f64 / 9.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn linf_values() {
        let m = 10_000;
        let f = |x: &[f64]| x[0];
        assert_eq!(linf_error(f, f, &unit(), m).unwrap(), 0.0);
        let v = linf_error(f, |_: &[f64]| 0.0, &unit(), m).unwrap();
        assert!((v - (1.0 - 0.5 / m as f64)).abs() < 1e-12);
        let s = linf_error(|x: &[f64]| (2.0 * PI * x[0]).sin(), |_: &[f64]| 0.0, &unit(), m).unwrap();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(f64, f64)> = [16.0f64, 32.0, 64.0, 128.0].iter().map(|&n| (n, 3.0 * n.powi(-2))).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_errors() {
        let pairs: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0].iter().map(|&n| (n, 0.1)).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn log_pollution() {
        let pairs: Vec<(f64, f64)> = [32.0, 64.0, 128.0, 256.0, 512.0].iter().map(|&n: &f64| (n, n.ln() / n)).collect();
        let fit = fit_rate(&pairs).unwrap();
        // Least squares slope of log(ln n / n) against log n, computed independently.
        assert!((fit.slope + 0.788_896_87).abs() < 1e-7, "slope {}", fit.slope);
        assert!(fit.slope > -1.0);
    }

    #[test]
    fn floor_and_preconditions() {
        let pairs = [(16.0, 1e-3), (32.0, 1e-4), (64.0, 1e-5), (128.0, 1e-12), (256.0, 1e-6)];
        let fit = fit_rate(&pairs).unwrap();
        assert_eq!(fit.excluded, vec![(128.0, 1e-12)]);
        assert_eq!(fit.points.len(), 4);
        assert!(matches!(fit_rate(&pairs[..3]), Err(AnalysisError::TooFewPoints(3))));
        let bad = [(16.0, 1.0), (16.0, 0.5), (32.0, 0.2), (64.0, 0.1)];
        assert!(matches!(fit_rate(&bad), Err(AnalysisError::NotIncreasing(_))));
    }
}
