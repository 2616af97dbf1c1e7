use nalgebra::{DMatrix, DVector};

use super::eigen::eig;
use super::matrix::{norm1_real, ComplexMatrix};
use super::LinalgError;

/// Solves `AᵀP + PA = −Q` by Kronecker vectorization.
///
/// The n²×n² system is `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q)` with column-major
/// `vec`. Cost is O(n⁶), fine for the n ≤ 10 loops handled here. The result is
/// symmetrized.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    if q.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch(format!(
            "Q is {}x{}, A is {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }

    let spectrum = eig(&ComplexMatrix::from_real(a)?)?.values;
    let tol = 1e-10 * spectrum.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for (i, &li) in spectrum.iter().enumerate() {
        for &lj in &spectrum[i..] {
            if (li + lj).norm() <= tol {
                return Err(LinalgError::SingularLyapunovOperator(li, lj));
            }
        }
    }

    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|x| -x));
    let vec_p = op.lu().solve(&rhs).ok_or_else(|| {
        let z = num_complex::Complex64::new(0.0, 0.0);
        LinalgError::SingularLyapunovOperator(z, z)
    })?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// ‖AᵀP + PA + Q‖₁.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    norm1_real(&(a.transpose() * p + p * a + q))
}

/// Cholesky-based positive-definiteness test of the symmetric part.
pub fn is_positive_definite(p: &DMatrix<f64>) -> bool {
    p.is_square() && ((p + p.transpose()) * 0.5).cholesky().is_some()
}
