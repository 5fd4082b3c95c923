//! Daubechies scaling functions and wavelets on dyadic tables, and the
//! multiscale kernel
//! Σ_k φ(x−k)φ(y−k) + Σ_{j=0}^{N} 2^{−2js} Σ_k ψ_{jk}(x)ψ_{jk}(y).

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveletError {
    #[error("Daubechies order must be in 1..=4 (got {0})")]
    UnsupportedOrder(usize),
    #[error("table resolution must be in 8..=16 (got {0})")]
    UnsupportedResolution(u32),
    #[error("filter identity '{identity}' violated by {error:e} for order {order}")]
    FilterIdentity { order: usize, identity: &'static str, error: f64 },
    #[error("refinement eigenproblem for order {0} is singular")]
    SingularRefinement(usize),
    #[error("partition of unity violated by {error:e} at x = {x}")]
    PartitionOfUnity { x: f64, error: f64 },
    #[error("table order {table} does not match kernel order {kernel}")]
    OrderMismatch { table: usize, kernel: usize },
}

const D2: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const D4: [f64; 4] = [
    0.482_962_913_144_534_16,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.129_409_522_551_260_4,
];
const D6: [f64; 6] = [
    0.332_670_552_950_082_85,
    0.806_891_509_311_093_2,
    0.459_877_502_118_491_54,
    -0.135_011_020_010_255_06,
    -0.085_441_273_882_026_88,
    0.035_226_291_885_709_55,
];
const D8: [f64; 8] = [
    0.230_377_813_308_896_15,
    0.714_846_570_552_914_8,
    0.630_880_767_929_858_6,
    -0.027_983_769_416_858_83,
    -0.187_034_811_719_092_34,
    0.030_841_381_835_560_67,
    0.032_883_011_666_885_12,
    -0.010_597_401_785_069,
];

/// Low-pass filter h_0..h_{2p−1} of the order-p Daubechies family.
pub fn daubechies_filter(p: usize) -> Result<&'static [f64], WaveletError> {
    match p {
        1 => Ok(&D2),
        2 => Ok(&D4),
        3 => Ok(&D6),
        4 => Ok(&D8),
        _ => Err(WaveletError::UnsupportedOrder(p)),
    }
}

/// g_k = (−1)^k h_{2p−1−k}.
pub fn highpass_filter(h: &[f64]) -> Vec<f64> {
    let l = h.len() - 1;
    (0..h.len())
        .map(|k| if k % 2 == 0 { h[l - k] } else { -h[l - k] })
        .collect()
}

/// Checks Σh = √2, Σh_k h_{k+2m} = δ_{m0} and Σ(−1)^k h_k = 0.
pub fn check_filter_identities(p: usize) -> Result<(), WaveletError> {
    let h = daubechies_filter(p)?;
    let sum: f64 = h.iter().sum();
    if (sum - SQRT_2).abs() > 1e-12 {
        return Err(WaveletError::FilterIdentity { order: p, identity: "sum", error: sum - SQRT_2 });
    }
    for m in 0..p {
        let c: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
        let want = if m == 0 { 1.0 } else { 0.0 };
        if (c - want).abs() > 1e-10 {
            return Err(WaveletError::FilterIdentity {
                order: p,
                identity: "orthogonality",
                error: c - want,
            });
        }
    }
    let alt: f64 = h.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).sum();
    if alt.abs() > 1e-10 {
        return Err(WaveletError::FilterIdentity { order: p, identity: "alternating", error: alt });
    }
    Ok(())
}

/// φ and ψ sampled at spacing 2^{−J} on their common support [0, 2p−1].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletTable {
    pub order: usize,
    pub resolution: u32,
    pub filter: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

pub const DEFAULT_RESOLUTION: u32 = 12;

impl WaveletTable {
    pub fn build(p: usize, resolution: u32) -> Result<Self, WaveletError> {
        check_filter_identities(p)?;
        if !(8..=16).contains(&resolution) {
            return Err(WaveletError::UnsupportedResolution(resolution));
        }
        let h = daubechies_filter(p)?;
        let g = highpass_filter(h);
        let support = 2 * p - 1;
        let scale = 1usize << resolution;
        let len = support * scale + 1;
        let (phi, psi) = if p == 1 {
            let phi = (0..len).map(|m| if m < scale { 1.0 } else { 0.0 }).collect();
            let psi = (0..len)
                .map(|m| {
                    if m < scale / 2 {
                        1.0
                    } else if m < scale {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (phi, psi)
        } else {
            let mut phi = integer_values(h)?;
            for lev in 1..=resolution {
                let half = 1usize << (lev - 1);
                let n = support * (1usize << lev) + 1;
                let prev = phi;
                phi = (0..n)
                    .map(|m| {
                        let mut acc = 0.0;
                        for (k, hk) in h.iter().enumerate() {
                            if let Some(idx) = m.checked_sub(k * half) {
                                if let Some(v) = prev.get(idx) {
                                    acc += hk * v;
                                }
                            }
                        }
                        SQRT_2 * acc
                    })
                    .collect();
            }
            let psi = (0..len)
                .map(|m| {
                    let mut acc = 0.0;
                    for (k, gk) in g.iter().enumerate() {
                        if let Some(idx) = (2 * m).checked_sub(k * scale) {
                            if let Some(v) = phi.get(idx) {
                                acc += gk * v;
                            }
                        }
                    }
                    SQRT_2 * acc
                })
                .collect();
            (phi, psi)
        };
        let table = Self { order: p, resolution, filter: h.to_vec(), phi, psi };
        for &x in &[0.25, 0.5, 0.75] {
            let err = table.partition_of_unity(x) - 1.0;
            if err.abs() > 1e-6 {
                return Err(WaveletError::PartitionOfUnity { x, error: err });
            }
        }
        Ok(table)
    }

    pub fn support(&self) -> f64 {
        (2 * self.order - 1) as f64
    }

    pub fn phi_samples(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_samples(&self) -> &[f64] {
        &self.psi
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (1u64 << self.resolution) as f64
    }

    #[inline]
    fn lookup(&self, tab: &[f64], t: f64) -> f64 {
        if !(t >= 0.0) || t >= self.support() {
            return 0.0;
        }
        let u = t * (1u64 << self.resolution) as f64;
        let i = u.floor() as usize;
        if i + 1 >= tab.len() {
            return tab[tab.len() - 1];
        }
        let fr = u - i as f64;
        tab[i] + fr * (tab[i + 1] - tab[i])
    }

    /// φ(t); Haar uses the exact indicator.
    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        if self.order == 1 {
            return if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 };
        }
        self.lookup(&self.phi, t)
    }

    /// ψ(t); Haar uses the exact step.
    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        if self.order == 1 {
            return if (0.0..0.5).contains(&t) {
                1.0
            } else if (0.5..1.0).contains(&t) {
                -1.0
            } else {
                0.0
            };
        }
        self.lookup(&self.psi, t)
    }

    /// Σ_k φ(x − k).
    pub fn partition_of_unity(&self, x: f64) -> f64 {
        let l = self.support();
        let lo = (x - l).ceil() as i64;
        let hi = x.floor() as i64;
        (lo..=hi).map(|k| self.phi(x - k as f64)).sum()
    }

    /// CSV with columns x, phi, psi at the table points.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,phi,psi\n");
        let dx = self.spacing();
        for (m, (f, g)) in self.phi.iter().zip(&self.psi).enumerate() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", m as f64 * dx, f, g));
        }
        out
    }
}

/// φ at the integers 0..=2p−1: the unit-sum eigenvector of M_ij = √2 h_{2i−j}
/// for eigenvalue 1.
fn integer_values(h: &[f64]) -> Result<Vec<f64>, WaveletError> {
    let n = h.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = 2 * i as i64 - j as i64;
            if (0..n as i64).contains(&k) {
                a[(i, j)] = SQRT_2 * h[k as usize];
            }
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let v = a
        .lu()
        .solve(&rhs)
        .ok_or(WaveletError::SingularRefinement((n) / 2))?;
    Ok(v.iter().copied().collect())
}

/// Multiscale kernel with support pruning.
#[derive(Debug, Clone)]
pub struct WaveletKernel {
    pub s: f64,
    pub level: usize,
    table: WaveletTable,
    level_weights: Vec<f64>,
}

impl WaveletKernel {
    pub fn new(s: f64, level: usize, table: WaveletTable) -> Self {
        let level_weights = (0..=level)
            .map(|j| 2f64.powf(j as f64 * (1.0 - 2.0 * s)))
            .collect();
        Self { s, level, table, level_weights }
    }

    pub fn with_order(s: f64, level: usize, order: usize, table: WaveletTable) -> Result<Self, WaveletError> {
        if table.order != order {
            return Err(WaveletError::OrderMismatch { table: table.order, kernel: order });
        }
        Ok(Self::new(s, level, table))
    }

    pub fn table(&self) -> &WaveletTable {
        &self.table
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    /// 2^{−2js}·2^j, the combined level weight including the ψ_{jk} normalization.
    pub fn level_weight(&self, j: usize) -> f64 {
        self.level_weights[j]
    }

    /// Scaling-function part Σ_k φ(x−k)φ(y−k).
    pub fn coarse_term(&self, x: f64, y: f64) -> f64 {
        let l = self.table.support();
        let lo = (x - l).ceil().max((y - l).ceil()) as i64;
        let hi = x.floor().min(y.floor()) as i64;
        let mut v = 0.0;
        for k in lo..=hi {
            let kf = k as f64;
            v += self.table.phi(x - kf) * self.table.phi(y - kf);
        }
        v
    }

    /// Σ_k ψ(2^j x − k)ψ(2^j y − k) without the level weight.
    pub fn level_term(&self, j: usize, x: f64, y: f64) -> f64 {
        let l = self.table.support();
        let sc = (j as f64).exp2();
        let (xs, ys) = (sc * x, sc * y);
        let lo = (xs - l).ceil().max((ys - l).ceil()) as i64;
        let hi = xs.floor().min(ys.floor()) as i64;
        let mut v = 0.0;
        for k in lo..=hi {
            let kf = k as f64;
            v += self.table.psi(xs - kf) * self.table.psi(ys - kf);
        }
        v
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let l = self.table.support();
        let mut v = self.coarse_term(x, y);
        let gap = (x - y).abs();
        for j in 0..=self.level {
            if gap * (j as f64).exp2() >= l {
                break;
            }
            v += self.level_weights[j] * self.level_term(j, x, y);
        }
        v
    }
}

/// Posterior mean through per-level coefficient maps
/// c_{jk} = Σᵢ αᵢ ψ(2^j xᵢ − k).
#[derive(Debug, Clone)]
pub struct WaveletMean {
    kernel: WaveletKernel,
    coarse: Vec<(i64, f64)>,
    levels: Vec<Vec<(i64, f64)>>,
}

impl WaveletMean {
    pub fn new(kernel: &WaveletKernel, xs: &[f64], alpha: &[f64]) -> Self {
        let table = &kernel.table;
        let l = table.support();
        let gather = |sc: f64, f: &dyn Fn(f64) -> f64| {
            let mut map: BTreeMap<i64, f64> = BTreeMap::new();
            for (x, a) in xs.iter().zip(alpha) {
                let xs = sc * x;
                let lo = (xs - l).ceil() as i64;
                let hi = xs.floor() as i64;
                for k in lo..=hi {
                    *map.entry(k).or_insert(0.0) += a * f(xs - k as f64);
                }
            }
            map.into_iter().collect::<Vec<_>>()
        };
        let coarse = gather(1.0, &|t| table.phi(t));
        let levels = (0..=kernel.level)
            .map(|j| gather((j as f64).exp2(), &|t| table.psi(t)))
            .collect();
        Self { kernel: kernel.clone(), coarse, levels }
    }

    fn sum_level(&self, coef: &[(i64, f64)], xs: f64, f: impl Fn(f64) -> f64) -> f64 {
        let l = self.kernel.table.support();
        let lo = (xs - l).ceil() as i64;
        let hi = xs.floor() as i64;
        let start = coef.partition_point(|(k, _)| *k < lo);
        coef[start..]
            .iter()
            .take_while(|(k, _)| *k <= hi)
            .map(|(k, c)| c * f(xs - *k as f64))
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = &self.kernel.table;
        let mut v = self.sum_level(&self.coarse, x, |u| t.phi(u));
        for (j, coef) in self.levels.iter().enumerate() {
            if coef.is_empty() {
                continue;
            }
            let sc = (j as f64).exp2();
            v += self.kernel.level_weights[j] * self.sum_level(coef, sc * x, |u| t.psi(u));
        }
        v
    }
}
