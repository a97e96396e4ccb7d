//! Small dense complex linear-algebra helpers shared by the simulator,
//! shadow estimators and observables.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CMatrix2 = Matrix2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity2() -> CMatrix2 {
    CMatrix2::new(ONE, ZERO, ZERO, ONE)
}

pub fn pauli_x() -> CMatrix2 {
    CMatrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> CMatrix2 {
    CMatrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> CMatrix2 {
    CMatrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// Projector onto `|0>`.
pub fn proj0() -> CMatrix2 {
    CMatrix2::new(ONE, ZERO, ZERO, ZERO)
}

/// Projector onto `|1>`.
pub fn proj1() -> CMatrix2 {
    CMatrix2::new(ZERO, ZERO, ZERO, ONE)
}

pub fn to_dynamic(m: &CMatrix2) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = hermitian_part(m);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Clip negative eigenvalues of a Hermitian matrix and renormalize to unit trace.
pub fn psd_project(m: &CMatrix) -> CMatrix {
    let eig = hermitian_part(m).symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let n = m.nrows();
    if total <= 0.0 {
        return CMatrix::identity(n, n) * c(1.0 / n as f64, 0.0);
    }
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in clipped.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * c(lam / total, 0.0);
    }
    out
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
