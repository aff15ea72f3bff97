//! Small dense helpers for Hermitian matrices.
//!
//! Every per-frequency matrix in the crate is a `DMatrix<Complex64>`; the
//! channel counts are small (one to a handful), so allocations per grid
//! point are cheap compared with the Fourier work.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Default absolute eigenvalue tolerance, multiplied by the largest matrix
/// norm of the object being checked.
pub const DEFAULT_EIG_TOL: f64 = 1e-9;

pub fn scalar(value: f64) -> CMatrix {
    CMatrix::from_element(1, 1, Complex64::new(value, 0.0))
}

pub fn real_diagonal(n: usize, value: f64) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, Complex64::new(value, 0.0))
}

/// Largest absolute entry of `m - m†`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Frobenius norm.
pub fn norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], CMatrix::identity(1, 1));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Solves `nu = (kappa * gamma + gamma * kappa) / 2` for Hermitian `kappa`
/// in the eigenbasis of `gamma`.
///
/// Returns the smallest eigenvalue of `gamma` as the error value when it is
/// not above `tol`.
pub fn solve_symmetrized(gamma: &CMatrix, nu: &CMatrix, tol: f64) -> std::result::Result<CMatrix, f64> {
    let (g, u) = hermitian_eigen(gamma);
    if g[0] <= tol {
        return Err(g[0]);
    }
    let rotated = u.adjoint() * nu * &u;
    let n = g.len();
    let kappa_eig = CMatrix::from_fn(n, n, |a, b| rotated[(a, b)] * (2.0 / (g[a] + g[b])));
    Ok(hermitize(&(&u * kappa_eig * u.adjoint())))
}

/// `(kappa * gamma + gamma * kappa) / 2`
pub fn symmetrized_product(kappa: &CMatrix, gamma: &CMatrix) -> CMatrix {
    (kappa * gamma + gamma * kappa).scale(0.5)
}

pub fn lerp(a: &CMatrix, b: &CMatrix, frac: f64) -> CMatrix {
    a.scale(1.0 - frac) + b.scale(frac)
}

pub fn max_imaginary(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Largest imaginary part over every matrix of a frequency function.
pub fn max_imaginary_all(f: &crate::kernels::MatrixFunction) -> f64 {
    f.data().iter().map(max_imaginary).fold(0.0, f64::max)
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}
