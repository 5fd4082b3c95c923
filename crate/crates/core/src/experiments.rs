//! Convergence studies: each study couples the design size n, the kernel
//! resolution N and the nugget λ, fits every row, and regresses the errors
//! against n on log-log axes.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, fit_rate, inset_grid, AnalysisError, Quadrature, RateFit};
use crate::functions::{Smoothness, TargetError, TargetFunction, TargetSpec};
use crate::geometry::{make_design, DesignKind, DesignSet, GeometryError, Region};
use crate::kernels::wavelet::WaveletTable;
use crate::kernels::{Kernel, KernelError, KernelSpec};
use crate::kriging::{self, KrigingError};
use crate::linalg::norm2;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid study config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("numerical failure at n = {n}: {source}")]
    Numerical {
        n: usize,
        #[source]
        source: KrigingError,
    },
}

impl ExperimentError {
    /// True for failures that happen during computation rather than validation.
    pub fn is_numerical(&self) -> bool {
        matches!(self, ExperimentError::Numerical { .. })
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    MaternEpistemic,
    KlTrig,
    Wavelet,
    Fem,
}

impl StudyKind {
    pub fn tag(self) -> &'static str {
        match self {
            StudyKind::MaternEpistemic => "matern-epistemic",
            StudyKind::KlTrig => "kl-trig",
            StudyKind::Wavelet => "wavelet",
            StudyKind::Fem => "fem",
        }
    }
}

/// How the nugget follows the fill distance. With exponent e fixed by the
/// study, `sqrt-lambda` sets √λ = h^e, `lambda` sets λ = h^e, `zero`
/// interpolates exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuggetPolicy {
    #[default]
    SqrtLambda,
    Lambda,
    Zero,
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn unit_degree() -> usize {
    1
}
fn four() -> usize {
    4
}
fn table_resolution() -> u32 {
    crate::kernels::wavelet::DEFAULT_RESOLUTION
}
fn midpoint() -> DesignKind {
    DesignKind::MidpointGrid
}

/// Kernel parameters; each study reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Matérn smoothness ν_N.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    /// Sobolev exponent s of the KL or wavelet kernel.
    #[serde(default)]
    pub s: Option<f64>,
    /// Daubechies order p.
    #[serde(default = "two")]
    pub order: usize,
    #[serde(default = "table_resolution")]
    pub resolution: u32,
    /// Finite element degree.
    #[serde(default = "unit_degree")]
    pub degree: usize,
    /// FEM mesh count per design point, N = c·n.
    #[serde(default = "four")]
    pub mesh_factor: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            nu: None,
            sigma: 1.0,
            kappa: 1.0,
            s: None,
            order: 2,
            resolution: table_resolution(),
            degree: 1,
            mesh_factor: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A study description as read from JSON.
///
/// The target is given on the unit interval. The KL study windows it onto
/// Ω inside D = (0, 1); the wavelet study maps it onto Ω when Ω is not the
/// unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub schedule: Vec<usize>,
    pub target: TargetSpec,
    #[serde(default)]
    pub kernel: KernelParams,
    #[serde(default)]
    pub nugget_policy: NuggetPolicy,
    #[serde(default = "midpoint")]
    pub design: DesignKind,
    #[serde(default)]
    pub seed: u64,
    /// Simpson points per axis for the L² norm.
    #[serde(default)]
    pub quadrature: Option<usize>,
    /// Inset grid points per axis for the L∞ norm.
    #[serde(default)]
    pub linf_resolution: Option<usize>,
    #[serde(default)]
    pub region: Option<RegionSpec>,
    /// Accepted interval for the fitted L² slope.
    #[serde(default)]
    pub l2_band: Option<[f64; 2]>,
    #[serde(default)]
    pub linf_band: Option<[f64; 2]>,
    #[serde(default)]
    pub min_r2: Option<f64>,
}

/// Default half-width of the accepted slope band around the prediction.
pub const DEFAULT_BAND: f64 = 0.3;
pub const DEFAULT_MIN_R2: f64 = 0.95;
/// Largest per-step growth of the L² error still counted as monotone.
pub const MONOTONE_TOLERANCE: f64 = 0.2;
/// Points per axis at which predictive variances are checked on each row.
const VARIANCE_PROBES: usize = 101;

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn region(&self) -> Result<Region, ExperimentError> {
        let r = match (&self.region, self.study) {
            (Some(r), _) => Region::new(r.lower.clone(), r.upper.clone(), r.lower.clone(), r.upper.clone())?,
            (None, StudyKind::KlTrig) => Region::interval_in(0.2, 0.8, 0.0, 1.0)?,
            (None, StudyKind::Wavelet) => Region::interval(0.0, 4.0)?,
            (None, _) => Region::unit(self.target_dim())?,
        };
        if self.study == StudyKind::KlTrig {
            return Ok(Region::interval_in(r.lower[0], r.upper[0], 0.0, 1.0)?);
        }
        Ok(r)
    }

    fn target_dim(&self) -> usize {
        TargetFunction::new(&self.target).map(|t| t.dim()).unwrap_or(1)
    }

    /// The target as evaluated over Ω.
    pub fn prepared_target(&self) -> Result<TargetFunction, ExperimentError> {
        let region = self.region()?;
        let spec = match self.study {
            StudyKind::KlTrig => TargetSpec::Windowed {
                inner: Box::new(self.target.clone()),
                omega: [region.lower[0], region.upper[0]],
                ambient: [0.0, 1.0],
            },
            StudyKind::Wavelet if region.lower[0] != 0.0 || region.upper[0] != 1.0 => TargetSpec::Rescaled {
                inner: Box::new(self.target.clone()),
                lower: region.lower[0],
                upper: region.upper[0],
            },
            _ => self.target.clone(),
        };
        Ok(TargetFunction::new(&spec)?)
    }

    /// Sobolev index s_N of the fitted kernel's native space.
    pub fn kernel_smoothness(&self, d: usize) -> Result<f64, ExperimentError> {
        match self.study {
            StudyKind::MaternEpistemic => match self.kernel.nu {
                Some(nu) => Ok(nu + d as f64 / 2.0),
                None => config_err("matern-epistemic needs kernel.nu"),
            },
            StudyKind::KlTrig | StudyKind::Wavelet => match self.kernel.s {
                Some(s) => Ok(s),
                None => config_err(format!("{} needs kernel.s", self.study.tag())),
            },
            StudyKind::Fem => Ok(1.0),
        }
    }

    /// Exponent e in the nugget coupling.
    fn nugget_exponent(&self) -> Result<f64, ExperimentError> {
        Ok(match self.study {
            StudyKind::MaternEpistemic => self.kernel.nu.unwrap_or(0.0),
            StudyKind::KlTrig | StudyKind::Wavelet => self.kernel_smoothness(1)? - 0.5,
            StudyKind::Fem => 0.5,
        })
    }

    pub fn nugget(&self, h: f64) -> Result<f64, ExperimentError> {
        let e = self.nugget_exponent()?;
        Ok(match self.nugget_policy {
            NuggetPolicy::SqrtLambda => h.powf(2.0 * e),
            NuggetPolicy::Lambda => h.powf(e),
            NuggetPolicy::Zero => 0.0,
        })
    }

    /// Kernel resolution N coupled to n: (n−1)/2 for KL,
    /// ceil(2s₀/(s₀−1)·log₂ n) for wavelets, c·n for FEM.
    pub fn resolution_for(&self, n: usize) -> Result<Option<usize>, ExperimentError> {
        Ok(match self.study {
            StudyKind::MaternEpistemic => None,
            StudyKind::KlTrig => Some((n - 1) / 2),
            StudyKind::Wavelet => {
                let s0 = self.effective_s0()?;
                Some((2.0 * s0 / (s0 - 1.0) * (n as f64).log2()).ceil() as usize)
            }
            StudyKind::Fem => Some(self.kernel.mesh_factor * n),
        })
    }

    fn effective_s0(&self) -> Result<f64, ExperimentError> {
        let t = TargetFunction::new(&self.target)?;
        Ok(t.smoothness().min_with(self.kernel_smoothness(t.dim())?))
    }

    pub fn kernel_spec(&self, n: usize, d: usize) -> Result<KernelSpec, ExperimentError> {
        let k = &self.kernel;
        let level = self.resolution_for(n)?;
        Ok(match self.study {
            StudyKind::MaternEpistemic => KernelSpec::Matern {
                sigma: k.sigma,
                nu: k.nu.unwrap_or(0.0),
                kappa: k.kappa,
                d,
            },
            StudyKind::KlTrig => KernelSpec::KlTrig {
                s: self.kernel_smoothness(1)?.round() as u32,
                truncation: level.unwrap_or(0),
            },
            StudyKind::Wavelet => KernelSpec::Wavelet {
                s: self.kernel_smoothness(1)?,
                level: level.unwrap_or(0),
                order: k.order,
                resolution: k.resolution,
            },
            StudyKind::Fem => KernelSpec::Fem { mesh: level.unwrap_or(1), degree: k.degree },
        })
    }

    fn quadrature_resolution(&self, d: usize) -> usize {
        self.quadrature.unwrap_or_else(|| analysis::default_quadrature(d))
    }

    fn linf_points(&self, d: usize) -> usize {
        self.linf_resolution
            .unwrap_or_else(|| if d == 1 { 10_000 } else { 200 })
    }

    fn design_for(&self, k: usize, n: usize, region: &Region) -> Result<DesignSet, ExperimentError> {
        Ok(make_design(self.design, n, region, self.seed.wrapping_add(k as u64))?)
    }

    /// Checks the config and every coupling precondition; returns the
    /// designs the rows will use.
    pub fn validate(&self) -> Result<Vec<DesignSet>, ExperimentError> {
        if self.schedule.len() < 4 {
            return config_err(format!(
                "schedule needs at least 4 sizes for a rate fit (got {})",
                self.schedule.len()
            ));
        }
        for w in self.schedule.windows(2) {
            if w[1] <= w[0] {
                return config_err(format!("schedule must be strictly increasing ({} then {})", w[0], w[1]));
            }
        }
        if self.schedule[0] == 0 {
            return config_err("schedule sizes must be positive");
        }
        let region = self.region()?;
        let d = region.dim();
        let target = self.prepared_target()?;
        if target.dim() != d {
            return config_err(format!("target is {}-dimensional but the region is {d}-dimensional", target.dim()));
        }
        if d != 1 && self.study != StudyKind::MaternEpistemic {
            return config_err(format!("{} studies are one-dimensional", self.study.tag()));
        }
        let s_n = self.kernel_smoothness(d)?;
        if let Some(b) = self.l2_band.iter().chain(self.linf_band.iter()).find(|b| !(b[0] < b[1])) {
            return config_err(format!("slope band [{}, {}] is empty", b[0], b[1]));
        }
        self.quadrature_check(d)?;
        match self.study {
            StudyKind::MaternEpistemic => {}
            StudyKind::KlTrig => {
                if let Some(&n) = self.schedule.iter().find(|&&n| n % 2 == 0 || n < 3) {
                    return config_err(format!(
                        "kl-trig couples 2N+1 = n, so every n must be odd and at least 3 (got {n})"
                    ));
                }
                if s_n.fract() != 0.0 || s_n < 1.0 {
                    return config_err(format!("kl-trig exponent s must be a positive integer (got {s_n})"));
                }
                if !region.strictly_contained() {
                    return config_err("kl-trig needs Ω strictly inside D = (0, 1)");
                }
            }
            StudyKind::Wavelet => {
                let spec = self.kernel_spec(self.schedule[0], 1)?;
                if !spec.wavelet_admissible() {
                    return config_err(format!(
                        "wavelet exponent must satisfy 1/2 < s < p (s = {s_n}, p = {})",
                        self.kernel.order
                    ));
                }
                let s0 = self.effective_s0()?;
                if !(s0 > 1.0) {
                    return config_err(format!("wavelet level coupling needs s0 > 1 (got {s0})"));
                }
            }
            StudyKind::Fem => {
                if region.lower[0] != 0.0 || region.upper[0] != 1.0 {
                    return config_err("fem study runs on Ω = D = (0, 1)");
                }
                if self.kernel.mesh_factor == 0 {
                    return config_err("fem mesh_factor must be positive");
                }
            }
        }
        let mut designs = Vec::with_capacity(self.schedule.len());
        for (k, &n) in self.schedule.iter().enumerate() {
            let design = self.design_for(k, n, &region)?;
            let q = design.separation_radius();
            let level = self.resolution_for(n)?;
            match (self.study, level) {
                (StudyKind::Wavelet, Some(level)) => {
                    let reach = (-(level as f64)).exp2() * (2 * self.kernel.order - 1) as f64;
                    if !(reach < q) {
                        return config_err(format!(
                            "wavelet invertibility needs 2^-N (2p-1) < q, but at n = {n}: \
                             2^-{level} * {} = {reach:e} >= q = {q:e}",
                            2 * self.kernel.order - 1
                        ));
                    }
                }
                (StudyKind::Fem, Some(mesh)) => {
                    if !(q > 1.0 / mesh as f64) {
                        return config_err(format!(
                            "fem invertibility needs q > 1/N, but at n = {n}: q = {q:e} <= 1/{mesh}"
                        ));
                    }
                }
                _ => {}
            }
            designs.push(design);
        }
        self.kernel_spec(self.schedule[0], d)?.validate()?;
        Ok(designs)
    }

    fn quadrature_check(&self, d: usize) -> Result<(), ExperimentError> {
        let unit = Region::unit(d)?;
        Quadrature::simpson(&unit, self.quadrature_resolution(d))?;
        inset_grid(&unit, self.linf_points(d))?;
        Ok(())
    }
}

/// Predicted (L², L∞) slopes in n: −(s₀∧s_N)/d and −((s₀∧s_N) − d/2)/d.
pub fn predicted_slopes(_study: StudyKind, s0: Smoothness, s_n: f64, d: usize) -> (f64, f64) {
    let s = s0.min_with(s_n);
    let d = d as f64;
    (-s / d, -(s - d / 2.0) / d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub level: Option<usize>,
    pub lambda: f64,
    pub h: f64,
    pub q: f64,
    pub rho: f64,
    pub l2: f64,
    pub linf: f64,
    pub sigma_min: f64,
    pub nnz_fraction: f64,
    pub precision_bandwidth: Option<usize>,
    /// ‖Y − Kα‖ ≤ λ/(σ_min+λ)‖Y‖ held.
    pub residual_bound_ok: bool,
    /// Predictive variance stayed above the roundoff threshold at every probe.
    pub variance_ok: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: StudyKind,
    pub s0: Smoothness,
    pub s_n: f64,
    pub d: usize,
    pub rows: Vec<StudyRow>,
    pub l2_fit: RateFit,
    pub linf_fit: RateFit,
    pub predicted_l2_slope: f64,
    pub predicted_linf_slope: f64,
    pub l2_band: [f64; 2],
    pub linf_band: [f64; 2],
    pub min_r2: f64,
    /// Each L² error is at most 1.2 times the previous one.
    pub monotone: bool,
}

pub const CSV_HEADER: &str =
    "n,N,lambda,h,q,rho,l2,linf,sigma_min,nnz_fraction,precision_bandwidth,residual_bound_ok,variance_ok";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StudyResult {
    pub fn rows_ok(&self) -> bool {
        self.rows.iter().all(|r| r.residual_bound_ok && r.variance_ok)
    }

    pub fn l2_in_band(&self) -> bool {
        (self.l2_band[0]..=self.l2_band[1]).contains(&self.l2_fit.slope)
    }

    pub fn linf_in_band(&self) -> bool {
        (self.linf_band[0]..=self.linf_band[1]).contains(&self.linf_fit.slope)
    }

    pub fn pass(&self) -> bool {
        self.l2_in_band() && self.l2_fit.r_squared >= self.min_r2 && self.rows_ok()
    }

    /// One line per row; floats with 17 significant digits. Wall time is
    /// left out so reruns compare byte for byte.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
                r.n,
                opt(r.level),
                r.lambda,
                r.h,
                r.q,
                r.rho,
                r.l2,
                r.linf,
                r.sigma_min,
                r.nnz_fraction,
                opt(r.precision_bandwidth),
                r.residual_bound_ok,
                r.variance_ok
            );
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "study": self.study.tag(),
            "predicted_l2_slope": self.predicted_l2_slope,
            "fitted_l2_slope": self.l2_fit.slope,
            "r2": self.l2_fit.r_squared,
            "pass": self.pass(),
            "predicted_linf_slope": self.predicted_linf_slope,
            "fitted_linf_slope": self.linf_fit.slope,
            "r2_linf": self.linf_fit.r_squared,
            "l2_band": self.l2_band,
            "linf_band": self.linf_band,
            "linf_in_band": self.linf_in_band(),
            "monotone": self.monotone,
            "rows_ok": self.rows_ok(),
            "s0": self.s0,
            "s_n": self.s_n,
            "d": self.d,
            "wall_time_s": self.rows.iter().map(|r| r.wall_time_s).sum::<f64>(),
        })
    }
}

/// Target values on the error-norm grids, shared by all rows.
struct ErrorGrids {
    quad: Quadrature,
    quad_values: Vec<f64>,
    inset: Vec<Vec<f64>>,
    inset_values: Vec<f64>,
}

impl ErrorGrids {
    fn new(cfg: &StudyConfig, region: &Region, target: &TargetFunction) -> Result<Self, ExperimentError> {
        let d = region.dim();
        let quad = Quadrature::simpson(region, cfg.quadrature_resolution(d))?;
        let inset = inset_grid(region, cfg.linf_points(d))?;
        let quad_values = quad.nodes.par_iter().map(|x| target.eval(x)).collect();
        let inset_values = inset.par_iter().map(|x| target.eval(x)).collect();
        Ok(Self { quad, quad_values, inset, inset_values })
    }
}

fn variance_probes(region: &Region) -> Vec<Vec<f64>> {
    let axis = |k: usize| -> Vec<f64> {
        let (a, b) = (region.lower[k], region.upper[k]);
        (0..VARIANCE_PROBES)
            .map(|j| a + (b - a) * j as f64 / (VARIANCE_PROBES - 1) as f64)
            .collect()
    };
    if region.dim() == 1 {
        axis(0).into_iter().map(|x| vec![x]).collect()
    } else {
        let g1 = axis(1);
        axis(0)
            .into_iter()
            .step_by(10)
            .flat_map(|x| g1.iter().step_by(10).map(move |y| vec![x, *y]))
            .collect()
    }
}

fn run_row(
    cfg: &StudyConfig,
    design: &DesignSet,
    target: &TargetFunction,
    grids: &ErrorGrids,
    table: Option<&WaveletTable>,
) -> Result<StudyRow, ExperimentError> {
    let start = Instant::now();
    let n = design.len();
    let d = design.dim();
    let spec = cfg.kernel_spec(n, d)?;
    let kernel = match (&spec, table) {
        (KernelSpec::Wavelet { s, level, .. }, Some(t)) => Kernel::wavelet_with_table(*s, *level, t.clone())?,
        _ => Kernel::new(spec.clone())?,
    };
    let h = design.fill_distance();
    let lambda = cfg.nugget(h)?;
    let y: Vec<f64> = design.points().iter().map(|p| target.eval(&p.coords)).collect();
    let numerical = |source| ExperimentError::Numerical { n, source };
    let model = kriging::fit(&kernel, design, &y, lambda).map_err(numerical)?;
    let mean = model.mean_evaluator();
    let e_quad: Vec<f64> = grids
        .quad
        .nodes
        .par_iter()
        .zip(&grids.quad_values)
        .map(|(x, f)| f - mean.eval(x))
        .collect();
    let l2 = grids.quad.l2_norm(&e_quad);
    let linf = grids
        .inset
        .par_iter()
        .zip(&grids.inset_values)
        .map(|(x, f)| (f - mean.eval(x)).abs())
        .reduce(|| 0.0, f64::max);
    let sigma_min = model.sigma_min().map_err(numerical)?;

    let ny = norm2(&y);
    let residual = norm2(&model.residual_on_design());
    let alpha_norm = norm2(model.coefficients());
    let max_diag = (0..n).map(|i| model.gram().get(i, i).abs()).fold(0.0, f64::max);
    let roundoff = 64.0 * n as f64 * f64::EPSILON * max_diag * alpha_norm;
    let bound = lambda / (sigma_min.max(0.0) + lambda) * ny;
    let residual_bound_ok = residual <= bound + 1e-8 * ny + roundoff;

    let probes = variance_probes(design.region());
    let variance_ok = design
        .points()
        .par_iter()
        .map(|p| p.coords.clone())
        .chain(probes.into_par_iter())
        .map(|x| model.predict_variance(&x))
        .all(|v| v.is_ok());

    let precision_bandwidth = kernel.as_fem().map(|a| a.precision_bandwidth());
    Ok(StudyRow {
        n,
        level: cfg.resolution_for(n)?,
        lambda,
        h,
        q: design.separation_radius(),
        rho: design.mesh_ratio(),
        l2,
        linf,
        sigma_min,
        nnz_fraction: model.gram().nonzero_fraction(),
        precision_bandwidth,
        residual_bound_ok,
        variance_ok,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn expect_kind(cfg: &StudyConfig, kind: StudyKind) -> Result<(), ExperimentError> {
    if cfg.study != kind {
        return config_err(format!("expected a {} config, got {}", kind.tag(), cfg.study.tag()));
    }
    Ok(())
}

pub fn run_matern_epistemic(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    expect_kind(cfg, StudyKind::MaternEpistemic)?;
    run_study(cfg)
}

pub fn run_kl_trig(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    expect_kind(cfg, StudyKind::KlTrig)?;
    run_study(cfg)
}

pub fn run_wavelet(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    expect_kind(cfg, StudyKind::Wavelet)?;
    run_study(cfg)
}

pub fn run_fem(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    expect_kind(cfg, StudyKind::Fem)?;
    run_study(cfg)
}

/// Validates and runs any study. Rows run in parallel; results are
/// independent of scheduling.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let designs = cfg.validate()?;
    let region = cfg.region()?;
    let d = region.dim();
    let target = cfg.prepared_target()?;
    let grids = ErrorGrids::new(cfg, &region, &target)?;
    let table = match cfg.study {
        StudyKind::Wavelet => Some(
            WaveletTable::build(cfg.kernel.order, cfg.kernel.resolution).map_err(KernelError::from)?,
        ),
        _ => None,
    };
    let rows = designs
        .par_iter()
        .map(|design| run_row(cfg, design, &target, &grids, table.as_ref()))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    for r in &rows {
        log::info!("{} n={} l2={:.3e} linf={:.3e} ({:.2}s)", cfg.study.tag(), r.n, r.l2, r.linf, r.wall_time_s);
    }

    let l2_fit = fit_rate(&rows.iter().map(|r| (r.n as f64, r.l2)).collect::<Vec<_>>())?;
    let linf_fit = fit_rate(&rows.iter().map(|r| (r.n as f64, r.linf)).collect::<Vec<_>>())?;
    let s_n = cfg.kernel_smoothness(d)?;
    let s0 = target.smoothness();
    let (p2, pinf) = predicted_slopes(cfg.study, s0, s_n, d);
    let monotone = rows.windows(2).all(|w| w[1].l2 <= (1.0 + MONOTONE_TOLERANCE) * w[0].l2);
    Ok(StudyResult {
        study: cfg.study,
        s0,
        s_n,
        d,
        l2_fit,
        linf_fit,
        predicted_l2_slope: p2,
        predicted_linf_slope: pinf,
        l2_band: cfg.l2_band.unwrap_or([p2 - DEFAULT_BAND, p2 + DEFAULT_BAND]),
        linf_band: cfg.linf_band.unwrap_or([pinf - DEFAULT_BAND, pinf + DEFAULT_BAND]),
        min_r2: cfg.min_r2.unwrap_or(DEFAULT_MIN_R2),
        monotone,
        rows,
    })
}
