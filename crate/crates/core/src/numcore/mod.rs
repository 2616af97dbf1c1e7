//! Dense linear algebra for the small systems that appear in reset loops
//! (n ≤ ~10): complex eigendecomposition, principal matrix powers, the
//! continuous Lyapunov equation and rational transfer-function evaluation.

mod eigen;
mod lyapunov;
mod matrix;
mod power;
mod rational;

pub use eigen::{eig, Eigen};
pub use lyapunov::{is_positive_definite, lyapunov_solve, lyapunov_residual};
pub use matrix::ComplexMatrix;
pub use power::{matrix_fractional_power, principal_power};
pub use rational::{eval_rational, poly_eval, poly_mul, poly_roots, RationalFunction, POLE_EPS};

use thiserror::Error;

/// Largest matrix the eigen solver accepts.
pub const MAX_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    TooLarge(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("eigenvalue {0} of A lies on [0, inf), the branch cut of the principal power")]
    BranchCutViolation(num_complex::Complex64),
    #[error("eigenvector basis is ill-conditioned (condition number {0:.3e})")]
    IllConditionedEigenbasis(f64),
    #[error("fractional order {0} is outside (0, 1]")]
    InvalidOrder(f64),
    #[error("Lyapunov operator is singular: eigenvalues {0} and {1} sum to zero")]
    SingularLyapunovOperator(num_complex::Complex64, num_complex::Complex64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("denominator vanishes at s = {0}")]
    PoleHit(num_complex::Complex64),
    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,
}
