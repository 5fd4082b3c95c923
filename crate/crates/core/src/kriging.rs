//! Gram assembly, the nugget-regularized kriging solve, posterior mean and
//! predictive variance.

use std::sync::OnceLock;

use crate::geometry::{DesignSet, Point};
use crate::kernels::{Kernel, KernelSpec, MeanEvaluator};
use crate::linalg::{
    self, dot, norm2, BandedCholesky, BandedSym, Dense, DenseCholesky, EigenNonConvergence,
    PivotFailure,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KrigingError {
    #[error("nugget must be finite and nonnegative (got {0})")]
    InvalidNugget(f64),
    #[error("observation vector has length {got}, design has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error(
        "K + lambda*I is not numerically positive definite (pivot {pivot:e} at row {index}); \
         try a nugget of at least {suggested_nugget:e}"
    )]
    FactorizationFailed { index: usize, pivot: f64, suggested_nugget: f64 },
    #[error("predictive variance {variance:e} at x = {x:?} is below the roundoff threshold")]
    NumericalBreakdown { x: Vec<f64>, variance: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenNonConvergence),
}

/// Kernel matrix in dense or banded storage.
#[derive(Debug, Clone, PartialEq)]
pub enum GramMatrix {
    Dense(Dense),
    Banded(BandedSym),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramStorage {
    Auto,
    Dense,
    Banded,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        match self {
            GramMatrix::Dense(d) => d.n,
            GramMatrix::Banded(b) => b.n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            GramMatrix::Dense(d) => d.get(i, j),
            GramMatrix::Banded(b) => b.get(i, j),
        }
    }

    pub fn is_banded(&self) -> bool {
        matches!(self, GramMatrix::Banded(_))
    }

    pub fn to_dense(&self) -> Dense {
        match self {
            GramMatrix::Dense(d) => d.clone(),
            GramMatrix::Banded(b) => b.to_dense(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            GramMatrix::Dense(d) => d.matvec(x),
            GramMatrix::Banded(b) => b.matvec(x),
        }
    }

    /// Fraction of entries that are exactly nonzero.
    pub fn nonzero_fraction(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) != 0.0 {
                    count += 1;
                }
            }
        }
        count as f64 / (n * n) as f64
    }

    fn with_nugget(&self, lambda: f64) -> GramMatrix {
        let mut g = self.clone();
        for i in 0..g.n() {
            match &mut g {
                GramMatrix::Dense(d) => d.set(i, i, d.get(i, i) + lambda),
                GramMatrix::Banded(b) => b.add(i, i, lambda),
            }
        }
        g
    }
}

/// Index bandwidth of a one-dimensional design under a compactly supported
/// kernel: max |i − j| over pairs closer than the support radius.
pub fn support_bandwidth(points: &[Point], radius: f64) -> usize {
    let mut bw = 0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if (points[i].coords[0] - points[j].coords[0]).abs() < radius {
                bw = bw.max(j - i);
            }
        }
    }
    bw
}

/// Whether the finest-level separation condition 2^{−N}(2p−1) < 2q holds.
pub fn wavelet_band_condition(spec: &KernelSpec, q: f64) -> bool {
    match *spec {
        KernelSpec::Wavelet { level, order, .. } => {
            let finest = (-(level as f64)).exp2() * (2 * order - 1) as f64;
            finest < 2.0 * q
        }
        _ => false,
    }
}

pub fn assemble_gram(kernel: &Kernel, design: &DesignSet) -> GramMatrix {
    let storage = match kernel.support_radius() {
        Some(r) if wavelet_band_condition(kernel.spec(), design.separation_radius()) => {
            let bw = support_bandwidth(design.points(), r);
            if 2 * (bw + 1) <= design.len() {
                GramStorage::Banded
            } else {
                GramStorage::Dense
            }
        }
        _ => GramStorage::Dense,
    };
    assemble_gram_with(kernel, design.points(), storage)
}

/// Assemble with an explicit storage choice. Banded storage requires a
/// compactly supported kernel; otherwise dense storage is used.
pub fn assemble_gram_with(kernel: &Kernel, points: &[Point], storage: GramStorage) -> GramMatrix {
    let dense = kernel.gram(points);
    let radius = match (storage, kernel.support_radius()) {
        (GramStorage::Dense, _) | (_, None) => return GramMatrix::Dense(dense),
        (_, Some(r)) => r,
    };
    let bw = support_bandwidth(points, radius);
    let mut b = BandedSym::zeros(points.len(), bw);
    for i in 0..points.len() {
        for j in i.saturating_sub(bw)..=i {
            b.set(i, j, dense.get(i, j));
        }
    }
    GramMatrix::Banded(b)
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(DenseCholesky),
    Banded(BandedCholesky),
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Dense(f) => f.solve(b),
            Factor::Banded(f) => f.solve(b),
        }
    }
}

fn factorize(g: &GramMatrix) -> Result<Factor, PivotFailure> {
    match g {
        GramMatrix::Dense(d) => DenseCholesky::factor(d).map(Factor::Dense),
        GramMatrix::Banded(b) => BandedCholesky::factor(b).map(Factor::Banded),
    }
}

/// A fitted interpolant. Borrows the kernel; immutable after fitting.
#[derive(Debug, Clone)]
pub struct KrigingModel<'k> {
    kernel: &'k Kernel,
    design: DesignSet,
    nugget: f64,
    observations: Vec<f64>,
    alpha: Vec<f64>,
    gram: GramMatrix,
    factor: Factor,
    sigma_min: OnceLock<Result<f64, EigenNonConvergence>>,
}

pub fn fit<'k>(
    kernel: &'k Kernel,
    design: &DesignSet,
    observations: &[f64],
    nugget: f64,
) -> Result<KrigingModel<'k>, KrigingError> {
    let gram = assemble_gram(kernel, design);
    fit_with_gram(kernel, design, gram, observations, nugget)
}

pub fn fit_with_gram<'k>(
    kernel: &'k Kernel,
    design: &DesignSet,
    gram: GramMatrix,
    observations: &[f64],
    nugget: f64,
) -> Result<KrigingModel<'k>, KrigingError> {
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return Err(KrigingError::InvalidNugget(nugget));
    }
    let n = design.len();
    if observations.len() != n {
        return Err(KrigingError::LengthMismatch { expected: n, got: observations.len() });
    }
    let regularized = gram.with_nugget(nugget);
    let factor = factorize(&regularized).map_err(|PivotFailure { index, pivot }| {
        let max_diag = (0..n).map(|i| regularized.get(i, i).abs()).fold(0.0, f64::max);
        let floor = 16.0 * n as f64 * f64::EPSILON * max_diag;
        KrigingError::FactorizationFailed {
            index,
            pivot,
            suggested_nugget: 10.0 * pivot.abs().max(floor),
        }
    })?;
    let mut alpha = factor.solve(observations);
    let r: Vec<f64> = observations
        .iter()
        .zip(regularized.matvec(&alpha))
        .map(|(y, k)| y - k)
        .collect();
    let correction = factor.solve(&r);
    for (a, c) in alpha.iter_mut().zip(correction) {
        *a += c;
    }
    Ok(KrigingModel {
        kernel,
        design: design.clone(),
        nugget,
        observations: observations.to_vec(),
        alpha,
        gram,
        factor,
        sigma_min: OnceLock::new(),
    })
}

/// Smallest eigenvalue of a Gram matrix.
pub fn min_eigenvalue(gram: &GramMatrix) -> Result<f64, EigenNonConvergence> {
    linalg::min_eigenvalue(&gram.to_dense())
}

impl<'k> KrigingModel<'k> {
    pub fn kernel(&self) -> &'k Kernel {
        self.kernel
    }

    pub fn design(&self) -> &DesignSet {
        &self.design
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.alpha
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// ‖(K + λI)α − Y‖ / ‖Y‖.
    pub fn relative_residual(&self) -> f64 {
        let kr = self.gram.matvec(&self.alpha);
        let r: Vec<f64> = self
            .observations
            .iter()
            .zip(kr)
            .zip(&self.alpha)
            .map(|((y, k), a)| k + self.nugget * a - y)
            .collect();
        let ny = norm2(&self.observations);
        if ny == 0.0 {
            norm2(&r)
        } else {
            norm2(&r) / ny
        }
    }

    /// σ_min(K), computed once on first use.
    pub fn sigma_min(&self) -> Result<f64, KrigingError> {
        self.sigma_min
            .get_or_init(|| min_eigenvalue(&self.gram))
            .clone()
            .map_err(KrigingError::from)
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        dot(&self.kernel.column(x, self.design.points()), &self.alpha)
    }

    /// Fast evaluator of the posterior mean for many points.
    pub fn mean_evaluator(&self) -> MeanEvaluator<'_> {
        self.kernel.mean_evaluator(self.design.points(), &self.alpha)
    }

    /// Φ(x,x) − k(x)ᵀ(K+λI)⁻¹k(x), clamped at zero for roundoff-sized
    /// negatives.
    pub fn predict_variance(&self, x: &[f64]) -> Result<f64, KrigingError> {
        let k = self.kernel.column(x, self.design.points());
        let prior = self.kernel.eval(x, x);
        let v = prior - dot(&k, &self.factor.solve(&k));
        if v >= 0.0 {
            Ok(v)
        } else if v >= -1e-8 * prior {
            Ok(0.0)
        } else {
            Err(KrigingError::NumericalBreakdown { x: x.to_vec(), variance: v })
        }
    }

    /// f(xᵢ) − predict_mean(xᵢ) over the design.
    pub fn residual_on_design(&self) -> Vec<f64> {
        let fitted = self.gram.matvec(&self.alpha);
        self.observations.iter().zip(fitted).map(|(y, f)| y - f).collect()
    }

    /// αᵀKα, the squared native-space norm of the interpolant.
    pub fn rkhs_norm_sq(&self) -> f64 {
        dot(&self.alpha, &self.gram.matvec(&self.alpha))
    }

    /// CSV with columns x, mean, variance for one-dimensional models.
    pub fn prediction_trace_csv(&self, xs: &[f64]) -> Result<String, KrigingError> {
        let mut out = String::from("x,mean,variance\n");
        for &x in xs {
            let m = self.predict_mean(&[x]);
            let v = self.predict_variance(&[x])?;
            out.push_str(&format!("{x:.16e},{m:.16e},{v:.16e}\n"));
        }
        Ok(out)
    }
}
