//! Lagrange finite elements on a uniform mesh of [0, 1] and the kernel
//! B(x)ᵀ(M + A)⁻¹B(y).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::linalg::{BandedCholesky, BandedSym, PivotFailure};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("mesh count must be at least 1")]
    EmptyMesh,
    #[error("polynomial degree must be 1 or 2 (got {0})")]
    UnsupportedDegree(usize),
    #[error("M + A is not positive definite (pivot {pivot:e} at row {index}); assembly is inconsistent")]
    Factorization { index: usize, pivot: f64 },
    #[error("requested {requested} eigenpairs but the space has dimension {dim}")]
    TooManyEigenpairs { requested: usize, dim: usize },
    #[error("mass matrix is not positive definite")]
    MassNotPositive,
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Local Lagrange basis values and derivatives on the reference element [0, 1].
fn reference_basis(p: usize, t: f64) -> ([f64; 3], [f64; 3]) {
    match p {
        1 => ([1.0 - t, t, 0.0], [-1.0, 1.0, 0.0]),
        _ => (
            [
                2.0 * (t - 0.5) * (t - 1.0),
                -4.0 * t * (t - 1.0),
                2.0 * t * (t - 0.5),
            ],
            [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
        ),
    }
}

#[derive(Debug, Clone)]
pub struct FemAssembly {
    pub mesh: usize,
    pub degree: usize,
    pub mass: BandedSym,
    pub stiffness: BandedSym,
    precision: BandedSym,
    factor: BandedCholesky,
}

/// Element mass and stiffness matrices on an element of width 1/N.
pub fn element_matrices(mesh: usize, p: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let width = 1.0 / mesh as f64;
    let nloc = p + 1;
    let mut me = vec![vec![0.0; nloc]; nloc];
    let mut ae = vec![vec![0.0; nloc]; nloc];
    for &(t, w) in &GAUSS3 {
        let (v, dv) = reference_basis(p, t);
        for a in 0..nloc {
            for b in 0..nloc {
                me[a][b] += w * v[a] * v[b] * width;
                ae[a][b] += w * dv[a] * dv[b] / width;
            }
        }
    }
    (me, ae)
}

impl FemAssembly {
    pub fn new(mesh: usize, degree: usize) -> Result<Self, FemError> {
        if mesh == 0 {
            return Err(FemError::EmptyMesh);
        }
        if degree != 1 && degree != 2 {
            return Err(FemError::UnsupportedDegree(degree));
        }
        let dim = degree * mesh + 1;
        let mut mass = BandedSym::zeros(dim, degree);
        let mut stiffness = BandedSym::zeros(dim, degree);
        let (me, ae) = element_matrices(mesh, degree);
        for e in 0..mesh {
            let base = degree * e;
            for a in 0..=degree {
                for b in 0..=a {
                    mass.add(base + a, base + b, me[a][b]);
                    stiffness.add(base + a, base + b, ae[a][b]);
                }
            }
        }
        let mut precision = mass.clone();
        for (q, a) in precision.data.iter_mut().zip(&stiffness.data) {
            *q += a;
        }
        let factor = BandedCholesky::factor(&precision)
            .map_err(|PivotFailure { index, pivot }| FemError::Factorization { index, pivot })?;
        Ok(Self { mesh, degree, mass, stiffness, precision, factor })
    }

    pub fn dim(&self) -> usize {
        self.degree * self.mesh + 1
    }

    /// Q = M + A.
    pub fn precision(&self) -> &BandedSym {
        &self.precision
    }

    /// Number of nodal bands of Q, 2·(half-bandwidth) + 1.
    pub fn precision_bandwidth(&self) -> usize {
        2 * self.precision.occupied_bandwidth() + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / (self.degree * self.mesh) as f64
    }

    /// Nonzero nodal basis values at x ∈ [0, 1]: (first global index, values).
    pub fn basis_at(&self, x: f64) -> (usize, [f64; 3]) {
        let n = self.mesh as f64;
        let e = ((x * n).floor() as usize).min(self.mesh - 1);
        let t = x * n - e as f64;
        let (v, _) = reference_basis(self.degree, t);
        (self.degree * e, v)
    }

    /// Q⁻¹ B(x) as a dense nodal vector.
    pub fn solve_basis(&self, x: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dim()];
        let (start, v) = self.basis_at(x);
        for a in 0..=self.degree {
            rhs[start + a] = v[a];
        }
        self.factor.solve_in_place(&mut rhs);
        rhs
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }

    /// B(x)ᵀ w.
    pub fn basis_dot(&self, x: f64, w: &[f64]) -> f64 {
        let (start, v) = self.basis_at(x);
        (0..=self.degree).map(|a| v[a] * w[start + a]).sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        self.basis_dot(x, &self.solve_basis(y))
    }
}

/// Generalized eigenpairs A v = λ M v, ascending, M-orthonormal.
pub fn fem_eigendecompose(
    asm: &FemAssembly,
    count: usize,
) -> Result<Vec<(f64, Vec<f64>)>, FemError> {
    let dim = asm.dim();
    if count > dim {
        return Err(FemError::TooManyEigenpairs { requested: count, dim });
    }
    let m = asm.mass.to_dense().to_nalgebra();
    let a = asm.stiffness.to_dense().to_nalgebra();
    let chol = m.clone().cholesky().ok_or(FemError::MassNotPositive)?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(dim, dim))
        .ok_or(FemError::MassNotPositive)?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut out = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let u = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&u)
            .ok_or(FemError::MassNotPositive)?;
        out.push((eig.eigenvalues[i].max(0.0), v.iter().copied().collect()));
    }
    Ok(out)
}

/// Posterior mean B(x)ᵀ w with nodal weights w = Q⁻¹ Σᵢ αᵢ B(xᵢ).
#[derive(Debug, Clone)]
pub struct FemMean {
    weights: Vec<f64>,
}

impl FemMean {
    pub fn new(asm: &FemAssembly, xs: &[f64], alpha: &[f64]) -> Self {
        let mut rhs = vec![0.0; asm.dim()];
        for (x, a) in xs.iter().zip(alpha) {
            let (start, v) = asm.basis_at(*x);
            for k in 0..=asm.degree {
                rhs[start + k] += a * v[k];
            }
        }
        Self { weights: asm.solve(&rhs) }
    }

    pub fn eval(&self, asm: &FemAssembly, x: f64) -> f64 {
        asm.basis_dot(x, &self.weights)
    }
}
