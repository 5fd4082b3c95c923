//! Kernel specifications and their evaluable realizations.

pub mod bessel;
pub mod fem;
pub mod kl_trig;
pub mod matern;
pub mod wavelet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Point};
use crate::linalg::Dense;

pub use fem::{fem_eigendecompose, FemAssembly, FemError, FemMean};
pub use kl_trig::{KlTrig, KlTrigMean};
pub use matern::Matern;
pub use wavelet::{WaveletError, WaveletKernel, WaveletMean, WaveletTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("argument {value} lies outside the kernel domain [{lower}, {upper}]")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },
    #[error("point has dimension {got} but the kernel expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

fn one() -> usize {
    1
}

fn default_resolution() -> u32 {
    wavelet::DEFAULT_RESOLUTION
}

/// Declarative kernel description; serializes with a `family` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    Matern {
        sigma: f64,
        nu: f64,
        kappa: f64,
        #[serde(default = "one")]
        d: usize,
    },
    KlTrig {
        s: u32,
        #[serde(alias = "n")]
        truncation: usize,
    },
    Wavelet {
        s: f64,
        level: usize,
        order: usize,
        #[serde(default = "default_resolution")]
        resolution: u32,
    },
    Fem {
        mesh: usize,
        degree: usize,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::InvalidParameter(m));
        match *self {
            KernelSpec::Matern { sigma, nu, kappa, d } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("matern sigma must be positive (got {sigma})"));
                }
                if !(nu > 0.0 && nu.is_finite()) {
                    return bad(format!("matern nu must be positive (got {nu})"));
                }
                if !(kappa > 0.0 && kappa.is_finite()) {
                    return bad(format!("matern kappa must be positive (got {kappa})"));
                }
                if d != 1 && d != 2 {
                    return bad(format!("matern dimension must be 1 or 2 (got {d})"));
                }
            }
            KernelSpec::KlTrig { s, .. } => {
                if s < 1 {
                    return bad("kl-trig exponent s must be at least 1".into());
                }
            }
            KernelSpec::Wavelet { s, order, resolution, .. } => {
                if !(s > 0.0 && s.is_finite()) {
                    return bad(format!("wavelet exponent s must be positive (got {s})"));
                }
                if !(1..=4).contains(&order) {
                    return bad(format!("wavelet order must be in 1..=4 (got {order})"));
                }
                if !(8..=16).contains(&resolution) {
                    return bad(format!("wavelet table resolution must be in 8..=16 (got {resolution})"));
                }
            }
            KernelSpec::Fem { mesh, degree } => {
                if mesh < 1 {
                    return bad("fem mesh count must be at least 1".into());
                }
                if degree != 1 && degree != 2 {
                    return bad(format!("fem degree must be 1 or 2 (got {degree})"));
                }
            }
        }
        Ok(())
    }

    /// Sobolev index of the native space.
    pub fn nominal_smoothness(&self) -> f64 {
        match *self {
            KernelSpec::Matern { nu, d, .. } => nu + d as f64 / 2.0,
            KernelSpec::KlTrig { s, .. } => s as f64,
            KernelSpec::Wavelet { s, .. } => s,
            KernelSpec::Fem { .. } => 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            KernelSpec::Matern { d, .. } => d,
            _ => 1,
        }
    }

    /// The conservative admissibility proxy 1/2 < s < p for wavelet kernels.
    pub fn wavelet_admissible(&self) -> bool {
        match *self {
            KernelSpec::Wavelet { s, order, .. } => s > 0.5 && s < order as f64,
            _ => true,
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    Matern(Matern),
    KlTrig(KlTrig),
    Wavelet(WaveletKernel),
    Fem(FemAssembly),
}

/// An evaluable kernel with all tables and factorizations precomputed.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    family: Family,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self, KernelError> {
        spec.validate()?;
        let family = match spec {
            KernelSpec::Matern { sigma, nu, kappa, d } => Family::Matern(Matern { sigma, nu, kappa, d }),
            KernelSpec::KlTrig { s, truncation } => Family::KlTrig(KlTrig::new(s, truncation)),
            KernelSpec::Wavelet { s, level, order, resolution } => {
                let table = WaveletTable::build(order, resolution)?;
                Family::Wavelet(WaveletKernel::new(s, level, table))
            }
            KernelSpec::Fem { mesh, degree } => Family::Fem(FemAssembly::new(mesh, degree)?),
        };
        Ok(Self { spec, family })
    }

    /// Wavelet kernel sharing an already built table.
    pub fn wavelet_with_table(s: f64, level: usize, table: WaveletTable) -> Result<Self, KernelError> {
        let spec = KernelSpec::Wavelet { s, level, order: table.order, resolution: table.resolution };
        spec.validate()?;
        Ok(Self { spec, family: Family::Wavelet(WaveletKernel::new(s, level, table)) })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn nominal_smoothness(&self) -> f64 {
        self.spec.nominal_smoothness()
    }

    /// Closed domain [lower, upper] of each argument, when restricted.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::KlTrig(_) | Family::Fem(_) => Some((0.0, 1.0)),
            _ => None,
        }
    }

    /// Distance beyond which the kernel vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.family {
            Family::Wavelet(w) => Some(w.table().support()),
            _ => None,
        }
    }

    pub fn as_fem(&self) -> Option<&FemAssembly> {
        match &self.family {
            Family::Fem(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_wavelet(&self) -> Option<&WaveletKernel> {
        match &self.family {
            Family::Wavelet(w) => Some(w),
            _ => None,
        }
    }

    pub fn as_kl_trig(&self) -> Option<&KlTrig> {
        match &self.family {
            Family::KlTrig(k) => Some(k),
            _ => None,
        }
    }

    /// Kernel value without domain checks.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            Family::Matern(m) => m.at_distance(distance(x, y)),
            Family::KlTrig(k) => k.eval(x[0], y[0]),
            Family::Wavelet(w) => w.eval(x[0], y[0]),
            Family::Fem(a) => a.eval(x[0], y[0]),
        }
    }

    pub fn try_eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check_arg(x)?;
        self.check_arg(y)?;
        Ok(self.eval(x, y))
    }

    pub fn check_arg(&self, x: &[f64]) -> Result<(), KernelError> {
        if x.len() != self.dim() {
            return Err(KernelError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if let Some((lo, hi)) = self.domain() {
            for &v in x {
                if !(v >= lo && v <= hi) {
                    return Err(KernelError::OutOfDomain { value: v, lower: lo, upper: hi });
                }
            }
        }
        Ok(())
    }

    /// Symmetric Gram matrix; the upper triangle is computed and mirrored.
    pub fn gram(&self, points: &[Point]) -> Dense {
        let n = points.len();
        let rows: Vec<Vec<f64>> = match &self.family {
            Family::Fem(asm) => {
                let xs: Vec<f64> = points.iter().map(|p| p.coords[0]).collect();
                let solved: Vec<Vec<f64>> = xs.par_iter().map(|&x| asm.solve_basis(x)).collect();
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        (i..n)
                            .map(|j| {
                                let (a, b) = if xs[i] <= xs[j] { (i, j) } else { (j, i) };
                                asm.basis_dot(xs[a], &solved[b])
                            })
                            .collect()
                    })
                    .collect()
            }
            _ => (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| self.eval(&points[i].coords, &points[j].coords)).collect())
                .collect(),
        };
        let mut g = Dense::zeros(n);
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                g.set(i, i + off, v);
                g.set(i + off, i, v);
            }
        }
        g
    }

    /// k(x) = [Φ(x, xᵢ)]ᵢ.
    pub fn column(&self, x: &[f64], points: &[Point]) -> Vec<f64> {
        match &self.family {
            Family::Fem(asm) => {
                let w = asm.solve_basis(x[0]);
                points.iter().map(|p| asm.basis_dot(p.coords[0], &w)).collect()
            }
            _ => points.iter().map(|p| self.eval(x, &p.coords)).collect(),
        }
    }

    /// Cross-covariance matrix, one row per evaluation point.
    pub fn cross(&self, eval_points: &[Point], points: &[Point]) -> Vec<Vec<f64>> {
        eval_points
            .par_iter()
            .map(|x| self.column(&x.coords, points))
            .collect()
    }

    /// Evaluator of x ↦ Σᵢ αᵢ Φ(x, xᵢ) using the cheapest representation
    /// available for the family.
    pub fn mean_evaluator<'a>(&'a self, points: &'a [Point], alpha: &'a [f64]) -> MeanEvaluator<'a> {
        let scalars = || points.iter().map(|p| p.coords[0]).collect::<Vec<_>>();
        match &self.family {
            Family::Matern(_) => MeanEvaluator::Direct { kernel: self, points, alpha },
            Family::KlTrig(k) => MeanEvaluator::KlTrig(KlTrigMean::new(k, &scalars(), alpha)),
            Family::Wavelet(w) => MeanEvaluator::Wavelet(WaveletMean::new(w, &scalars(), alpha)),
            Family::Fem(a) => MeanEvaluator::Fem(a, FemMean::new(a, &scalars(), alpha)),
        }
    }
}

pub enum MeanEvaluator<'a> {
    Direct { kernel: &'a Kernel, points: &'a [Point], alpha: &'a [f64] },
    KlTrig(KlTrigMean),
    Wavelet(WaveletMean),
    Fem(&'a FemAssembly, FemMean),
}

impl MeanEvaluator<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanEvaluator::Direct { kernel, points, alpha } => points
                .iter()
                .zip(alpha.iter())
                .map(|(p, a)| a * kernel.eval(x, &p.coords))
                .sum(),
            MeanEvaluator::KlTrig(m) => m.eval(x[0]),
            MeanEvaluator::Wavelet(m) => m.eval(x[0]),
            MeanEvaluator::Fem(asm, m) => m.eval(asm, x[0]),
        }
    }
}
