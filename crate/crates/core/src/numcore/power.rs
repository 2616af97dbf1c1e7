use nalgebra::DMatrix;
use num_complex::Complex64;

use super::eigen::eig;
use super::matrix::{norm1, ComplexMatrix};
use super::LinalgError;

/// Eigenbases worse than this are treated as defective.
pub const MAX_EIGENBASIS_CONDITION: f64 = 1e12;
/// Imaginary residue below this fraction of ‖·‖₁ is dropped.
pub const REALIFY_TOL: f64 = 1e-8;

/// `−(−A)^p` on the principal branch, through the eigendecomposition of `−A`.
///
/// Every eigenvalue of `A` must stay off `[0, ∞)` so that `−A` avoids the
/// cut of the principal logarithm. The result is realified when its imaginary
/// residue is below [`REALIFY_TOL`] relative to its 1-norm.
pub fn principal_power(a: &ComplexMatrix, p: f64) -> Result<ComplexMatrix, LinalgError> {
    let n = a.ensure_square()?;
    if n == 0 {
        return Ok(a.clone());
    }
    let neg = ComplexMatrix::new(-a.as_inner())?;
    let e = eig(&neg)?;

    let scale = a.norm1().max(1.0);
    let cut_tol = 1e-12 * scale;
    for &mu in &e.values {
        // mu is an eigenvalue of −A; the cut is mu ∈ (−∞, 0].
        if mu.im.abs() <= cut_tol && mu.re <= cut_tol {
            return Err(LinalgError::BranchCutViolation(-mu));
        }
    }

    let v = e.vectors.as_inner();
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(LinalgError::IllConditionedEigenbasis(f64::INFINITY))?;
    let cond = norm1(v) * norm1(&v_inv);
    if !cond.is_finite() || cond > MAX_EIGENBASIS_CONDITION {
        return Err(LinalgError::IllConditionedEigenbasis(cond));
    }

    let mapped = nalgebra::DVector::from_iterator(
        n,
        e.values.iter().map(|mu| (mu.ln() * p).exp()),
    );
    let result: DMatrix<Complex64> = -(v * DMatrix::from_diagonal(&mapped) * v_inv);
    let mut out = ComplexMatrix::new(result)?;
    out.realify(REALIFY_TOL);
    Ok(out)
}

/// The flow transform `−(−A)^{1/(2−α)}` of a fractional system of order `α`.
///
/// At `α = 1` the exponent is one and `A` is returned unchanged.
pub fn matrix_fractional_power(a: &ComplexMatrix, order: f64) -> Result<ComplexMatrix, LinalgError> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(LinalgError::InvalidOrder(order));
    }
    a.ensure_square()?;
    if order == 1.0 {
        return Ok(a.clone());
    }
    principal_power(a, 1.0 / (2.0 - order))
}
