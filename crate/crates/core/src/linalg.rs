//! Dense and banded symmetric positive-definite factorizations.
//!
//! Both factorizations report the first pivot that fails the positivity test
//! instead of returning an opaque failure, so callers can turn it into a
//! suggested nugget.

use nalgebra::{DMatrix, SymmetricEigen};

/// A pivot that was not safely positive during a Cholesky sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub index: usize,
    pub pivot: f64,
}

fn pivot_tolerance(n: usize, max_diag: f64) -> f64 {
    16.0 * n as f64 * f64::EPSILON * max_diag.max(f64::MIN_POSITIVE)
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| dot(row, x))
            .collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower Cholesky factor of a dense SPD matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    pub fn factor(a: &Dense) -> Result<Self, PivotFailure> {
        let n = a.n;
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let tol = pivot_tolerance(n, max_diag);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let rj = j * n;
            let d = a.get(j, j) - dot(&l[rj..rj + j], &l[rj..rj + j]);
            if !(d > tol) {
                return Err(PivotFailure { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[rj + j] = djj;
            for i in (j + 1)..n {
                let ri = i * n;
                let s = a.get(i, j) - dot(&l[ri..ri + j], &l[rj..rj + j]);
                l[ri + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve L y = b in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            b[i] = (b[i] - dot(row, &b[..i])) / self.l[i * n + i];
        }
    }

    /// Solve Lᵀ x = y in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = b[i] / self.l[i * n + i];
            b[i] = xi;
            for k in 0..i {
                b[k] -= self.l[i * n + k] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}

/// Symmetric banded matrix holding the diagonal and `bw` sub-diagonals.
///
/// Entry (i, j) with i ≥ j and i − j ≤ bw lives at `data[i * (bw + 1) + (bw - (i - j))]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            None
        } else {
            Some(i * (self.bw + 1) + self.bw - (i - j))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics when (i, j) is outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let v = self.get(i, j);
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let v = self.get(i, j);
                d.set(i, j, v);
                d.set(j, i, v);
            }
        }
        d
    }

    /// Smallest `b` such that all nonzero entries satisfy |i − j| ≤ b.
    pub fn occupied_bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                if self.get(i, j) != 0.0 {
                    b = b.max(i - j);
                }
            }
        }
        b
    }
}

/// Banded Cholesky factor, same storage layout as [`BandedSym`].
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: BandedSym,
}

impl BandedCholesky {
    pub fn factor(a: &BandedSym) -> Result<Self, PivotFailure> {
        let n = a.n;
        let bw = a.bw;
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let tol = pivot_tolerance(n, max_diag);
        let mut l = a.clone();
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l.get(j, j);
            for k in lo..j {
                let v = l.get(j, k);
                d -= v * v;
            }
            if !(d > tol) {
                return Err(PivotFailure { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                let lo_i = i.saturating_sub(bw);
                let mut s = l.get(i, j);
                for k in lo_i.max(lo)..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l.get(i, k) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in (i + 1)..=hi {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("inverse iteration did not converge after {iterations} steps")]
pub struct EigenNonConvergence {
    pub iterations: usize,
}

const DENSE_EIGEN_LIMIT: usize = 2000;

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Dense) -> Result<f64, EigenNonConvergence> {
    if a.n == 0 {
        return Ok(f64::INFINITY);
    }
    if a.n <= DENSE_EIGEN_LIMIT {
        let eig = SymmetricEigen::new(a.to_nalgebra());
        return Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    }
    min_eigenvalue_inverse_iteration(a, 500)
}

/// Inverse iteration. Falls back to a Gershgorin shift when the matrix is not
/// numerically positive definite, so a plain Cholesky factorization applies.
pub fn min_eigenvalue_inverse_iteration(
    a: &Dense,
    max_iter: usize,
) -> Result<f64, EigenNonConvergence> {
    let n = a.n;
    let mut lower = f64::INFINITY;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
        lower = lower.min(a.get(i, i) - off);
        scale = scale.max(a.get(i, i).abs() + off);
    }
    let mut chol = None;
    for candidate in [-1e-12 * scale.max(1e-300), lower - 1e-3 * scale.max(1e-300)] {
        let mut b = a.clone();
        for i in 0..n {
            b.set(i, i, a.get(i, i) - candidate);
        }
        if let Ok(c) = DenseCholesky::factor(&b) {
            chol = Some(c);
            break;
        }
    }
    let chol = chol.ok_or(EigenNonConvergence { iterations: 0 })?;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mu_prev = f64::INFINITY;
    for _ in 0..max_iter {
        let w = chol.solve(&v);
        let nw = norm2(&w);
        let mu = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if (mu - mu_prev).abs() <= 1e-11 * mu.abs() {
            let rq = dot(&v, &a.matvec(&v));
            return Ok(rq);
        }
        mu_prev = mu;
    }
    Err(EigenNonConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Dense {
        let mut a = Dense::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = (-((i as f64 - j as f64).abs()) * 0.7).exp();
                a.set(i, j, v);
            }
        }
        a
    }

    #[test]
    fn dense_cholesky_solves() {
        let a = spd(12);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = DenseCholesky::factor(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_cholesky_reports_pivot() {
        let mut a = Dense::zeros(2);
        a.data = vec![1.0, 1.0, 1.0, 1.0];
        let err = DenseCholesky::factor(&a).unwrap_err();
        assert_eq!(err.index, 1);
        assert!(err.pivot.abs() < 1e-15);
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let mut b = BandedSym::zeros(n, 2);
        for i in 0..n {
            b.set(i, i, 4.0 + i as f64 * 0.1);
            if i >= 1 {
                b.set(i, i - 1, -1.0);
            }
            if i >= 2 {
                b.set(i, i - 2, 0.3);
            }
        }
        let d = b.to_dense();
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let xb = BandedCholesky::factor(&b).unwrap().solve(&rhs);
        let xd = DenseCholesky::factor(&d).unwrap().solve(&rhs);
        for (u, v) in xb.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-13);
        }
        assert_eq!(b.occupied_bandwidth(), 2);
        for (u, v) in b.matvec(&rhs).iter().zip(d.matvec(&rhs)) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn min_eigen_two_by_two() {
        let e = (-1.0f64).exp();
        let a = Dense { n: 2, data: vec![1.0, e, e, 1.0] };
        assert!((min_eigenvalue(&a).unwrap() - (1.0 - e)).abs() < 1e-14);
    }

    #[test]
    fn inverse_iteration_agrees_with_dense() {
        let a = spd(40);
        let dense = min_eigenvalue(&a).unwrap();
        let inv = min_eigenvalue_inverse_iteration(&a, 5000).unwrap();
        assert!((dense - inv).abs() <= 1e-6 * dense.abs());
    }
}
