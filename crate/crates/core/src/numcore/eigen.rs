use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::{norm1, ComplexMatrix};
use super::{LinalgError, MAX_DIM};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues with unit-norm right eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// ‖MV − VΛ‖₁ / ‖M‖₁.
    pub fn relative_residual(&self, m: &ComplexMatrix) -> f64 {
        let v = self.vectors.as_inner();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        let r = m.as_inner() * v - v * lambda;
        norm1(&r) / m.norm1().max(f64::MIN_POSITIVE)
    }
}

/// Eigendecomposition through a complex Schur form `M = Q T Qᴴ`.
///
/// Eigenvectors of the triangular factor are obtained by back-substitution and
/// mapped back with `Q`. Eigenvalues are sorted by real part (descending), ties
/// broken by imaginary part (descending).
pub fn eig(m: &ComplexMatrix) -> Result<Eigen, LinalgError> {
    let n = m.ensure_square()?;
    if n > MAX_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: ComplexMatrix::identity(0),
        });
    }

    let schur = m
        .as_inner()
        .clone()
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or(LinalgError::ConvergenceFailure)?;
    let (q, t) = schur.unpack();

    let scale = norm1(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let mut pairs: Vec<(Complex64, nalgebra::DVector<Complex64>)> = (0..n)
        .map(|k| {
            let lambda = t[(k, k)];
            let mut y = nalgebra::DVector::<Complex64>::zeros(n);
            y[k] = Complex64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in (j + 1)..=k {
                    acc += t[(j, l)] * y[l];
                }
                let mut d = t[(j, j)] - lambda;
                // Repeated eigenvalue: perturb the pivot.
                if d.norm() < small {
                    d = Complex64::new(small, 0.0);
                }
                y[j] = -acc / d;
            }
            let mut v = &q * y;
            let nv = v.norm();
            v /= Complex64::new(nv, 0.0);
            (lambda, v)
        })
        .collect();

    let tie = 1e-10 * scale.max(1.0);
    pairs.sort_by(|a, b| compare_eigenvalues(a.0, b.0, tie));

    let values = pairs.iter().map(|p| p.0).collect();
    let cols: Vec<_> = pairs.into_iter().map(|p| p.1).collect();
    let vectors = ComplexMatrix::new(DMatrix::from_columns(&cols))?;
    Ok(Eigen { values, vectors })
}

fn compare_eigenvalues(a: Complex64, b: Complex64, tie: f64) -> Ordering {
    if (a.re - b.re).abs() <= tie {
        b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal)
    } else {
        b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal)
    }
}
