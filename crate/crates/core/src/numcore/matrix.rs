use nalgebra::DMatrix;
use num_complex::Complex64;

use super::LinalgError;

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Result<Self, LinalgError> {
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(inner))
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.0.is_square()
    }

    pub fn as_inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        norm1(&self.0)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
    }

    /// Real part, if every imaginary component is exactly zero.
    pub fn to_real(&self) -> Option<DMatrix<f64>> {
        if self.0.iter().all(|z| z.im == 0.0) {
            Some(self.0.map(|z| z.re))
        } else {
            None
        }
    }

    /// Drops the imaginary part when it is below `rel_tol` times the 1-norm.
    /// Returns whether the matrix is now real.
    pub fn realify(&mut self, rel_tol: f64) -> bool {
        let scale = self.norm1().max(f64::MIN_POSITIVE);
        if self.max_abs_imag() < rel_tol * scale {
            self.0.iter_mut().for_each(|z| z.im = 0.0);
            true
        } else {
            false
        }
    }

    pub(crate) fn ensure_square(&self) -> Result<usize, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NonSquare {
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok(self.rows())
    }
}

impl From<ComplexMatrix> for DMatrix<Complex64> {
    fn from(m: ComplexMatrix) -> Self {
        m.0
    }
}

pub(crate) fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn norm1_real(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let m = DMatrix::from_element(2, 2, Complex64::new(f64::NAN, 0.0));
        assert_eq!(ComplexMatrix::new(m), Err(LinalgError::NonFinite));
    }

    #[test]
    fn realify_respects_threshold() {
        let mut m = ComplexMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 1e-12), Complex64::new(-2.0, 0.0)],
        )
        .unwrap();
        assert!(m.realify(1e-8));
        assert_eq!(m.to_real().unwrap()[(0, 0)], 1.0);

        let mut m = ComplexMatrix::from_row_slice(1, 1, &[Complex64::new(1.0, 0.5)]).unwrap();
        assert!(!m.realify(1e-8));
        assert!(m.to_real().is_none());
    }
}
