//! Target functions with a declared Sobolev smoothness index.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetError {
    #[error("fourier targets need s0 > 1/2 (got {0})")]
    SmoothnessTooLow(f64),
    #[error("fourier targets need at least one term")]
    NoTerms,
    #[error("truncated power needs m >= 1")]
    ZeroPower,
    #[error("window interval ({a}, {b}) must lie strictly inside ({lower}, {upper})")]
    WindowTouchesBoundary { a: f64, b: f64, lower: f64, upper: f64 },
    #[error("rescaling interval must have positive length")]
    DegenerateRescale,
}

/// Declared smoothness; `Smooth` stands for "smoother than any kernel in play".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Finite(f64),
    Smooth,
}

impl Smoothness {
    /// min(s₀, s_N), where a smooth target resolves to s_N.
    pub fn min_with(self, s_n: f64) -> f64 {
        match self {
            Smoothness::Finite(s0) => s0.min(s_n),
            Smoothness::Smooth => s_n,
        }
    }
}

fn default_terms() -> usize {
    500
}

/// Serializable target description; coefficients are regenerated from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    Fourier {
        s0: f64,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Same decay as `Fourier` with every mode in phase at `center`, giving a
    /// cusp there of Hölder order s0 − 1/2.
    CuspFourier {
        s0: f64,
        #[serde(default = "default_terms")]
        terms: usize,
        center: f64,
    },
    TrigSeries {
        #[serde(default)]
        a0: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    TruncatedPower {
        m: u32,
        c: f64,
    },
    Sine,
    GaussianBump,
    TensorSine,
    Windowed {
        inner: Box<TargetSpec>,
        omega: [f64; 2],
        ambient: [f64; 2],
    },
    Rescaled {
        inner: Box<TargetSpec>,
        lower: f64,
        upper: f64,
    },
}

/// Exponent margin added to the Fourier decay so the target lies strictly
/// inside H^{s0}.
pub const FOURIER_MARGIN: f64 = 0.05;

/// Exponent margin subtracted from m + 1/2 for truncated powers.
pub const TRUNCATED_POWER_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Trig { a0: f64, a: Vec<f64>, b: Vec<f64> },
    TruncatedPower { m: u32, c: f64 },
    Sine,
    GaussianBump,
    TensorSine,
    Windowed { inner: Box<TargetFunction>, window: BumpWindow },
    Rescaled { inner: Box<TargetFunction>, lower: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    spec: TargetSpec,
    smoothness: Smoothness,
    periodic: bool,
    dim: usize,
    description: String,
    body: Body,
}

impl TargetFunction {
    pub fn new(spec: &TargetSpec) -> Result<Self, TargetError> {
        let (body, smoothness, periodic, dim, description) = match spec {
            TargetSpec::Fourier { s0, terms, seed } => {
                if !(*s0 > 0.5) {
                    return Err(TargetError::SmoothnessTooLow(*s0));
                }
                if *terms == 0 {
                    return Err(TargetError::NoTerms);
                }
                let (a, b) = fourier_coefficients(*s0, *terms, *seed);
                (
                    Body::Trig { a0: 0.0, a, b },
                    Smoothness::Finite(*s0),
                    true,
                    1,
                    format!("random-sign Fourier series, s0={s0}, {terms} terms, seed {seed}"),
                )
            }
            TargetSpec::CuspFourier { s0, terms, center } => {
                if !(*s0 > 0.5) {
                    return Err(TargetError::SmoothnessTooLow(*s0));
                }
                if *terms == 0 {
                    return Err(TargetError::NoTerms);
                }
                let (a, b) = cusp_coefficients(*s0, *terms, *center);
                (
                    Body::Trig { a0: 0.0, a, b },
                    Smoothness::Finite(*s0),
                    true,
                    1,
                    format!("in-phase Fourier series, s0={s0}, {terms} terms, cusp at {center}"),
                )
            }
            TargetSpec::TrigSeries { a0, a, b } => {
                (
                    Body::Trig { a0: *a0, a: a.clone(), b: b.clone() },
                    Smoothness::Smooth,
                    true,
                    1,
                    format!("trigonometric polynomial of degree {}", a.len().max(b.len())),
                )
            }
            TargetSpec::TruncatedPower { m, c } => {
                if *m == 0 {
                    return Err(TargetError::ZeroPower);
                }
                (
                    Body::TruncatedPower { m: *m, c: *c },
                    Smoothness::Finite(*m as f64 + 0.5 - TRUNCATED_POWER_MARGIN),
                    false,
                    1,
                    format!("max(0, x - {c})^{m}"),
                )
            }
            TargetSpec::Sine => (Body::Sine, Smoothness::Smooth, true, 1, "sin(2 pi x)".into()),
            TargetSpec::GaussianBump => (
                Body::GaussianBump,
                Smoothness::Smooth,
                false,
                1,
                "exp(-(x - 0.5)^2 / 0.02)".into(),
            ),
            TargetSpec::TensorSine => (
                Body::TensorSine,
                Smoothness::Smooth,
                true,
                2,
                "sin(2 pi x) sin(2 pi y)".into(),
            ),
            TargetSpec::Windowed { inner, omega, ambient } => {
                let f = TargetFunction::new(inner)?;
                let window = BumpWindow::new(omega[0], omega[1], ambient[0], ambient[1])?;
                let desc = format!("bump-windowed ({})", f.description);
                let s = f.smoothness;
                (Body::Windowed { inner: Box::new(f), window }, s, true, 1, desc)
            }
            TargetSpec::Rescaled { inner, lower, upper } => {
                if !(upper > lower) {
                    return Err(TargetError::DegenerateRescale);
                }
                let f = TargetFunction::new(inner)?;
                let desc = format!("({}) mapped from [{lower}, {upper}]", f.description);
                let (s, per) = (f.smoothness, f.periodic);
                (
                    Body::Rescaled { inner: Box::new(f), lower: *lower, width: upper - lower },
                    s,
                    per,
                    1,
                    desc,
                )
            }
        };
        Ok(Self { spec: spec.clone(), smoothness, periodic, dim, description, body })
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Fourier coefficients (a₀, a, b) for trigonometric targets.
    pub fn coefficients(&self) -> Option<(f64, &[f64], &[f64])> {
        match &self.body {
            Body::Trig { a0, a, b } => Some((*a0, a, b)),
            _ => None,
        }
    }

    /// a₀² + Σ(aₖ² + bₖ²)(1 + 4π²k²)^{s} for trigonometric targets.
    pub fn sobolev_norm_sq(&self, s: f64) -> Option<f64> {
        let (a0, a, b) = self.coefficients()?;
        Some(sobolev_norm_sq(a0, a, b, s))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Trig { a0, a, b } => trig_sum(*a0, a, b, x[0]),
            Body::TruncatedPower { m, c } => (x[0] - c).max(0.0).powi(*m as i32),
            Body::Sine => (2.0 * PI * x[0]).sin(),
            Body::GaussianBump => (-(x[0] - 0.5).powi(2) / 0.02).exp(),
            Body::TensorSine => (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin(),
            Body::Windowed { inner, window } => {
                let w = window.eval(x[0]);
                if w == 0.0 {
                    0.0
                } else {
                    w * inner.eval(x)
                }
            }
            Body::Rescaled { inner, lower, width } => inner.eval(&[(x[0] - lower) / width]),
        }
    }

    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.eval(&[x])
    }
}

/// Random-sign coefficients ξₖ k^{−(s0 + 1/2 + δ)} for k = 1..=terms.
pub fn fourier_coefficients(s0: f64, terms: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(terms);
    let mut b = Vec::with_capacity(terms);
    let exponent = -(s0 + 0.5 + FOURIER_MARGIN);
    for k in 1..=terms {
        let mag = (k as f64).powf(exponent);
        let sa = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let sb = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        a.push(sa * mag);
        b.push(sb * mag);
    }
    (a, b)
}

/// Coefficients k^{−(s0 + 1/2 + δ)} (cos 2πkc, sin 2πkc), so every mode
/// peaks at x = c.
pub fn cusp_coefficients(s0: f64, terms: usize, center: f64) -> (Vec<f64>, Vec<f64>) {
    let exponent = -(s0 + 0.5 + FOURIER_MARGIN);
    (1..=terms)
        .map(|k| {
            let mag = (k as f64).powf(exponent);
            let (s, c) = (2.0 * PI * k as f64 * center).sin_cos();
            (mag * c, mag * s)
        })
        .unzip()
}

pub fn trig_sum(a0: f64, a: &[f64], b: &[f64], x: f64) -> f64 {
    let mut v = a0;
    for k in 1..=a.len().max(b.len()) {
        let (s, c) = (2.0 * PI * k as f64 * x).sin_cos();
        v += a.get(k - 1).map_or(0.0, |ak| ak * c) + b.get(k - 1).map_or(0.0, |bk| bk * s);
    }
    v
}

pub fn sobolev_norm_sq(a0: f64, a: &[f64], b: &[f64], s: f64) -> f64 {
    let mut v = a0 * a0;
    for k in 1..=a.len().max(b.len()) {
        let ak = a.get(k - 1).copied().unwrap_or(0.0);
        let bk = b.get(k - 1).copied().unwrap_or(0.0);
        v += (ak * ak + bk * bk) * (1.0 + 4.0 * PI * PI * (k * k) as f64).powf(s);
    }
    v
}

/// Smooth cutoff equal to 1 on [a, b] and 0 outside the midpoint-buffered
/// interval [(lower + a)/2, (b + upper)/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpWindow {
    pub a: f64,
    pub b: f64,
    pub left: f64,
    pub right: f64,
}

fn bump_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ step rising from 0 at t ≤ 0 to 1 at t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let u = bump_exp(t);
        u / (u + bump_exp(1.0 - t))
    }
}

impl BumpWindow {
    pub fn new(a: f64, b: f64, lower: f64, upper: f64) -> Result<Self, TargetError> {
        if !(lower < a && a < b && b < upper) {
            return Err(TargetError::WindowTouchesBoundary { a, b, lower, upper });
        }
        Ok(Self { a, b, left: 0.5 * (lower + a), right: 0.5 * (b + upper) })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.a && x <= self.b {
            1.0
        } else if x < self.a {
            smooth_step((x - self.left) / (self.a - self.left))
        } else {
            smooth_step((self.right - x) / (self.right - self.b))
        }
    }
}

/// x ↦ η(x) f(x) for Ω = (a, b) strictly inside D = (lower, upper).
pub fn bump_window(
    f: &TargetSpec,
    omega: (f64, f64),
    ambient: (f64, f64),
) -> Result<TargetFunction, TargetError> {
    TargetFunction::new(&TargetSpec::Windowed {
        inner: Box::new(f.clone()),
        omega: [omega.0, omega.1],
        ambient: [ambient.0, ambient.1],
    })
}
