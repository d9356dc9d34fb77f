//! Dense SVD and symmetric eigendecomposition on nalgebra matrices, computed
//! with faer.

use faer::{Mat, Side};
use nalgebra::DMatrix;

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `(U, sigma, V)` with singular values in descending order;
/// `U: m x r`, `V: k x r`, `r = min(m, k)`.
pub(crate) fn sorted_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return (DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(k, 0));
    }
    let svd = to_faer(a).thin_svd().expect("SVD of a finite matrix converges");
    let sigma = svd.S().column_vector().iter().copied().collect();
    (from_faer(svd.U()), sigma, from_faer(svd.V()))
}

/// Singular values in descending order.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a).singular_values().expect("SVD of a finite matrix converges")
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub(crate) fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let evd = to_faer(a).self_adjoint_eigen(Side::Lower).expect("symmetric eigendecomposition converges");
    let values = evd.S().column_vector().iter().copied().collect();
    (values, from_faer(evd.U()))
}
