use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::eig;
use super::matrix::ComplexMatrix;
use super::LinalgError;

/// Denominators smaller than this are treated as poles.
pub const POLE_EPS: f64 = 1e-300;

/// Horner evaluation of a polynomial with descending-degree coefficients.
pub fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn trim_leading_zeros(c: &[f64]) -> &[f64] {
    let first = c.iter().position(|&x| x != 0.0).unwrap_or(c.len());
    &c[first..]
}

/// Roots of a polynomial (descending coefficients) as companion-matrix eigenvalues.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, LinalgError> {
    let c = trim_leading_zeros(coeffs);
    if c.is_empty() {
        return Err(LinalgError::ZeroDenominator);
    }
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    Ok(eig(&ComplexMatrix::from_real(&companion)?)?.values)
}

/// Ratio of two real polynomials, coefficients in descending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl RationalFunction {
    /// Leading zeros of the denominator are stripped; an all-zero denominator
    /// is rejected.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LinalgError> {
        let den = trim_leading_zeros(&den).to_vec();
        if den.is_empty() {
            return Err(LinalgError::ZeroDenominator);
        }
        if num.iter().chain(&den).any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { num, den })
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64, LinalgError> {
        let d = poly_eval(&self.den, s);
        if d.norm() < POLE_EPS {
            return Err(LinalgError::PoleHit(s));
        }
        Ok(poly_eval(&self.num, s) / d)
    }

    /// Degree of the numerator ignoring exact leading zeros; `None` for the zero polynomial.
    pub fn num_degree(&self) -> Option<usize> {
        let t = trim_leading_zeros(&self.num);
        (!t.is_empty()).then(|| t.len() - 1)
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// `deg(den) − deg(num)`; `None` for a zero numerator.
    pub fn relative_degree(&self) -> Option<isize> {
        self.num_degree()
            .map(|d| self.den_degree() as isize - d as isize)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree().is_none_or(|r| r > 0)
    }

    /// Leading numerator coefficient over leading denominator coefficient.
    pub fn high_frequency_gain(&self) -> f64 {
        trim_leading_zeros(&self.num).first().copied().unwrap_or(0.0) / self.den[0]
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, LinalgError> {
        poly_roots(&self.den)
    }
}

/// Free-function form of [`RationalFunction::eval`].
pub fn eval_rational(h: &RationalFunction, s: Complex64) -> Result<Complex64, LinalgError> {
    h.eval(s)
}
