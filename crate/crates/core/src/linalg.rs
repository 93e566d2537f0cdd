//! Dense complex helpers: Hermitian eigendecomposition and matrix functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `‖a − b‖_max`.
pub fn max_dev(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Entrywise deviation scaled by the magnitude of the matching diagonal
/// entries of `reference` (floored at 1). Used for rapidly growing matrix
/// functions such as `exp`.
pub fn scaled_dev(a: &CMatrix, reference: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            let scale = 1f64
                .max(reference[(i, i.min(reference.ncols() - 1))].norm())
                .max(reference[(j.min(reference.nrows() - 1), j)].norm());
            worst = worst.max((a[(i, j)] - reference[(i, j)]).norm() / scale);
        }
    }
    worst
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_dev(m, &m.adjoint())
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, z)| k % (m.nrows() + 1) == 0 || *z == Complex64::new(0.0, 0.0))
}

fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        let (values, vectors) = if is_diagonal(m) {
            (
                (0..n).map(|i| m[(i, i)].re).collect::<Vec<_>>(),
                CMatrix::identity(n, n),
            )
        } else if is_real(m) {
            let real = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
            let e = real.symmetric_eigen();
            (e.eigenvalues.iter().copied().collect(), e.eigenvectors.map(c))
        } else {
            let herm = (m + m.adjoint()).scale(0.5);
            let e = herm.symmetric_eigen();
            (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let values_sorted = order.iter().map(|&k| values[k]).collect();
        let vectors_sorted = CMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
        Self {
            values: values_sorted,
            vectors: vectors_sorted,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }

    /// `V diag(g(λ)) V†` for a complex-valued `g`.
    pub fn apply_complex(&self, g: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = g(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        if self.vectors == CMatrix::identity(n, n) {
            return scaled;
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        self.apply_complex(|x| c(f(x)))
    }
}

/// `f(m)` for Hermitian `m` through its eigendecomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    HermitianEigen::new(m).apply(f)
}

/// Inner product `⟨u, v⟩`, antilinear in `u`.
pub fn inner(u: &CVector, v: &CVector) -> Complex64 {
    u.dotc(v)
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}
