//! Matérn covariance σ² 2^{1−ν}/Γ(ν) (κr)^ν K_ν(κr).

use statrs::function::gamma::gamma;

use super::bessel::bessel_k;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matern {
    pub sigma: f64,
    pub nu: f64,
    pub kappa: f64,
    pub d: usize,
}

/// `Some(m)` when ν = m + 1/2 up to rounding.
pub fn half_integer_order(nu: f64) -> Option<u32> {
    let m = (nu - 0.5).round();
    (m >= 0.0 && (nu - 0.5 - m).abs() < 1e-14 && m < 64.0).then_some(m as u32)
}

/// Closed form for ν = m + 1/2:
/// σ² e^{−z} m!/(2m)! Σ_{i=0}^{m} (m+i)!/(i!(m−i)!) (2z)^{m−i}.
pub fn matern_half_integer(sigma2: f64, m: u32, z: f64) -> f64 {
    let fact = |k: u32| (1..=k).fold(1.0, |acc, j| acc * j as f64);
    let lead = fact(m) / fact(2 * m);
    let mut sum = 0.0;
    for i in 0..=m {
        let c = fact(m + i) / (fact(i) * fact(m - i));
        sum += c * (2.0 * z).powi((m - i) as i32);
    }
    sigma2 * (-z).exp() * lead * sum
}

/// General-order path through K_ν.
pub fn matern_general(sigma2: f64, nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return sigma2;
    }
    let v = sigma2 * 2f64.powf(1.0 - nu) / gamma(nu) * z.powf(nu) * bessel_k(nu, z);
    if v.is_finite() {
        v
    } else {
        sigma2
    }
}

impl Matern {
    pub fn at_distance(&self, r: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let z = self.kappa * r;
        if z == 0.0 {
            return s2;
        }
        match half_integer_order(self.nu) {
            Some(m) => matern_half_integer(s2, m, z),
            None => matern_general(s2, self.nu, z),
        }
    }

    pub fn nominal_smoothness(&self) -> f64 {
        self.nu + self.d as f64 / 2.0
    }
}
