//! Truncated trigonometric expansion on the periodic unit interval:
//! 1 + Σ_{k=1}^{N} (1+4π²k²)^{−s} cos(2πk(x−y)).

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct KlTrig {
    pub s: u32,
    pub truncation: usize,
    weights: Vec<f64>,
}

impl KlTrig {
    pub fn new(s: u32, truncation: usize) -> Self {
        let weights = (1..=truncation).map(|k| eigen_weight(s as f64, k)).collect();
        Self { s, truncation, weights }
    }

    /// Weight of frequency k ≥ 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Stationary cosine form.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let t = 2.0 * PI * (x - y).abs();
        let mut v = 1.0;
        for (i, w) in self.weights.iter().enumerate() {
            v += w * ((i + 1) as f64 * t).cos();
        }
        v
    }

    /// Product form with separate cosine and sine factors.
    pub fn eval_series(&self, x: f64, y: f64) -> f64 {
        let mut v = 1.0;
        for (i, w) in self.weights.iter().enumerate() {
            let k = (i + 1) as f64;
            let (sx, cx) = (2.0 * PI * k * x).sin_cos();
            let (sy, cy) = (2.0 * PI * k * y).sin_cos();
            v += w * (cx * cy + sx * sy);
        }
        v
    }

    /// Squared native-space norm of a₀ + Σ aₖ cos(2πk·) + bₖ sin(2πk·).
    pub fn rkhs_norm_sq(&self, a0: f64, a: &[f64], b: &[f64]) -> f64 {
        let mut v = a0 * a0;
        for k in 1..=a.len().max(b.len()) {
            let ak = a.get(k - 1).copied().unwrap_or(0.0);
            let bk = b.get(k - 1).copied().unwrap_or(0.0);
            v += (ak * ak + bk * bk) / eigen_weight(self.s as f64, k);
        }
        v
    }
}

/// (1 + 4π²k²)^{−s}.
pub fn eigen_weight(s: f64, k: usize) -> f64 {
    (1.0 + 4.0 * PI * PI * (k * k) as f64).powf(-s)
}

/// Posterior mean through the Fourier sums C_k = Σ αᵢ cos(2πk xᵢ) and
/// S_k = Σ αᵢ sin(2πk xᵢ).
#[derive(Debug, Clone)]
pub struct KlTrigMean {
    constant: f64,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
}

impl KlTrigMean {
    pub fn new(kernel: &KlTrig, xs: &[f64], alpha: &[f64]) -> Self {
        let constant = alpha.iter().sum();
        let mut cos_coef = vec![0.0; kernel.truncation];
        let mut sin_coef = vec![0.0; kernel.truncation];
        for (k, w) in kernel.weights.iter().enumerate() {
            let f = 2.0 * PI * (k + 1) as f64;
            let (mut c, mut s) = (0.0, 0.0);
            for (x, a) in xs.iter().zip(alpha) {
                let (sn, cs) = (f * x).sin_cos();
                c += a * cs;
                s += a * sn;
            }
            cos_coef[k] = w * c;
            sin_coef[k] = w * s;
        }
        Self { constant, cos_coef, sin_coef }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for (k, (c, s)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let (sn, cs) = (2.0 * PI * (k + 1) as f64 * x).sin_cos();
            v += c * cs + s * sn;
        }
        v
    }
}
