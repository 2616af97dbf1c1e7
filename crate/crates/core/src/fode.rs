//! Grünwald–Letnikov discretization of `D^α x = A x + B u`.
//!
//! With weights `w_i = (−1)^i C(α, i)` the fixed-step scheme is
//!
//! ```text
//! x_{k+1} = h^α (A x_k + B u_k) − Σ_{i=1}^{min(k+1, L)} w_i x_{k+1−i}
//! ```
//!
//! with the lower terminal at the first stored sample (t = 0). At `α = 1`
//! only `w_1 = −1` is nonzero and the scheme is forward Euler.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::StateSpaceModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FodeError {
    #[error("fractional order {0} is outside (0, 1]")]
    InvalidOrder(f64),
    #[error("step {0} must be positive and finite")]
    InvalidStep(f64),
    #[error("history mismatch: {0}")]
    HistoryMismatch(String),
    #[error("state index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

/// What a reset does to the fractional memory of the reset components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// The fractional integral restarts at the reset instant: all past
    /// samples of the component are zeroed.
    Clear,
    /// Only the newest sample is zeroed; the jump stays in the history.
    Keep,
    /// The element keeps integrating over its whole past and the reset
    /// subtracts the accumulated value from its output.
    #[default]
    Offset,
}

impl std::str::FromStr for MemoryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clear" => Ok(Self::Clear),
            "keep" => Ok(Self::Keep),
            "offset" => Ok(Self::Offset),
            other => Err(format!("unknown memory mode `{other}` (expected clear|keep|offset)")),
        }
    }
}

impl std::fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Clear => "clear",
            Self::Keep => "keep",
            Self::Offset => "offset",
        })
    }
}

/// Binomial weights `w_i = (−1)^i C(α, i)`, `i = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlWeights {
    order: f64,
    weights: Vec<f64>,
}

impl GlWeights {
    pub fn new(order: f64, len: usize) -> Result<Self, FodeError> {
        if !(order > 0.0 && order <= 1.0) {
            return Err(FodeError::InvalidOrder(order));
        }
        let mut w = Self {
            order,
            weights: vec![1.0],
        };
        w.extend_to(len);
        Ok(w)
    }

    /// Grows the table so that `w_len` exists.
    pub fn extend_to(&mut self, len: usize) {
        let mut last = *self.weights.last().expect("w_0 always present");
        for i in self.weights.len()..=len {
            last *= 1.0 - (self.order + 1.0) / i as f64;
            self.weights.push(last);
        }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Highest index `L`.
    pub fn max_index(&self) -> usize {
        self.weights.len() - 1
    }
}

/// `gl_weights(α, L)`: the first `L + 1` weights.
pub fn gl_weights(order: f64, len: usize) -> Result<GlWeights, FodeError> {
    GlWeights::new(order, len)
}

/// History of a fixed-step GL integration.
///
/// Samples are stored flat and time-ascending. With [`MemoryMode::Offset`] the
/// stored samples are the un-reset internal values and the visible state is
/// `stored − offset`.
#[derive(Debug, Clone)]
pub struct GlState {
    order: f64,
    step: f64,
    step_pow: f64,
    dim: usize,
    memory: Option<usize>,
    weights: GlWeights,
    // Number of nonzero weights beyond w_0 (1 at α = 1).
    support: Option<usize>,
    samples: Vec<f64>,
    start: usize,
    offset: Vec<f64>,
}

impl GlState {
    /// Starts a history at `x0`. `memory` bounds the number of past samples
    /// entering the sum (short-memory principle); `None` keeps them all.
    pub fn new(order: f64, step: f64, x0: &[f64], memory: Option<usize>) -> Result<Self, FodeError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(FodeError::InvalidStep(step));
        }
        if memory == Some(0) {
            return Err(FodeError::HistoryMismatch("memory length must be at least 1".into()));
        }
        let weights = GlWeights::new(order, 64)?;
        Ok(Self {
            order,
            step,
            step_pow: if order == 1.0 { step } else { step.powf(order) },
            dim: x0.len(),
            memory,
            weights,
            support: (order == 1.0).then_some(1),
            samples: x0.to_vec(),
            start: 0,
            offset: vec![0.0; x0.len()],
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn memory_length(&self) -> Option<usize> {
        self.memory
    }

    /// Number of retained samples.
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim.max(1) - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn raw(&self, idx: usize) -> &[f64] {
        let base = (self.start + idx) * self.dim;
        &self.samples[base..base + self.dim]
    }

    /// Visible state `idx` samples after the oldest retained one.
    pub fn sample(&self, idx: usize) -> Vec<f64> {
        self.raw(idx).iter().zip(&self.offset).map(|(z, c)| z - c).collect()
    }

    /// Newest visible state.
    pub fn current(&self) -> Vec<f64> {
        self.sample(self.len() - 1)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offset
    }

    fn push(&mut self, z: &[f64]) {
        self.samples.extend_from_slice(z);
        if let Some(l) = self.memory {
            if self.len() > l {
                self.start += 1;
                if self.start >= l.max(1024) {
                    self.samples.drain(..self.start * self.dim);
                    self.start = 0;
                }
            }
        }
    }

    /// Advances one step with right-hand side `f = A x + B u` already evaluated.
    ///
    /// Returns the new visible state.
    pub fn advance_with(&mut self, rhs: &[f64]) -> Result<Vec<f64>, FodeError> {
        if rhs.len() != self.dim {
            return Err(FodeError::HistoryMismatch(format!(
                "right-hand side has {} entries, state has {}",
                rhs.len(),
                self.dim
            )));
        }
        let n = self.dim;
        let len = self.len();
        let terms = self.support.map_or(len, |s| s.min(len));
        if self.weights.max_index() < terms {
            self.weights.extend_to((terms * 2).max(64));
        }
        let w = self.weights.as_slice();

        let mut z: Vec<f64> = rhs.iter().map(|f| self.step_pow * f).collect();
        let base = self.start * n;
        let newest = base + (len - 1) * n;
        for i in 1..=terms {
            let wi = w[i];
            let s = &self.samples[newest - (i - 1) * n..newest - (i - 1) * n + n];
            for (zj, sj) in z.iter_mut().zip(s) {
                *zj -= wi * sj;
            }
        }
        self.push(&z);
        Ok(z.iter().zip(&self.offset).map(|(z, c)| z - c).collect())
    }

    /// Zeroes the listed components of the newest state according to `mode`.
    pub fn reset(&mut self, indices: &[usize], mode: MemoryMode) -> Result<(), FodeError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(FodeError::IndexOutOfRange {
                index: bad,
                dim: self.dim,
            });
        }
        let n = self.dim;
        let len = self.len();
        let newest = (self.start + len - 1) * n;
        for &j in indices {
            match mode {
                MemoryMode::Clear => {
                    for k in 0..len {
                        self.samples[(self.start + k) * n + j] = 0.0;
                    }
                    self.offset[j] = 0.0;
                }
                MemoryMode::Keep => {
                    self.samples[newest + j] = self.offset[j];
                }
                MemoryMode::Offset => {
                    self.offset[j] = self.samples[newest + j];
                }
            }
        }
        Ok(())
    }
}

/// One GL step of `model` driven by the scalar input `u`; returns the new state.
pub fn gl_step(model: &StateSpaceModel, state: &mut GlState, u: f64) -> Result<Vec<f64>, FodeError> {
    if model.order() != state.order {
        return Err(FodeError::HistoryMismatch(format!(
            "model order {} differs from history order {}",
            model.order(),
            state.order
        )));
    }
    if model.dim() != state.dim || model.b().ncols() != 1 {
        return Err(FodeError::HistoryMismatch(format!(
            "model is {}x{} with {} inputs, history has dimension {}",
            model.dim(),
            model.dim(),
            model.b().ncols(),
            state.dim
        )));
    }
    let x = state.current();
    let rhs = flow_rhs(model.a(), model.b(), &x, u);
    state.advance_with(&rhs)
}

/// `A x + B u` for a single-input model.
pub fn flow_rhs(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>, x: &[f64], u: f64) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += a[(i, j)] * xj;
            }
            acc + b[(i, 0)] * u
        })
        .collect()
}

/// Functional form of [`GlState::reset`].
pub fn reset_history(mut state: GlState, indices: &[usize], mode: MemoryMode) -> Result<GlState, FodeError> {
    state.reset(indices, mode)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn scalar(a: f64, b: f64, order: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
            order,
        )
        .unwrap()
    }

    #[test]
    fn first_difference_weights() {
        assert_eq!(gl_weights(1.0, 3).unwrap().as_slice(), &[1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn half_order_weights() {
        let w = gl_weights(0.5, 3).unwrap();
        let expected = [1.0, -0.5, -0.125, -0.0625];
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let w = gl_weights(0.3, 2).unwrap();
        assert_abs_diff_eq!(w.as_slice()[2], -0.105, epsilon = 1e-15);
    }

    #[test]
    fn invalid_orders() {
        assert_eq!(gl_weights(0.0, 3).unwrap_err(), FodeError::InvalidOrder(0.0));
        assert_eq!(gl_weights(1.2, 3).unwrap_err(), FodeError::InvalidOrder(1.2));
    }

    #[test]
    fn euler_step_of_integrator() {
        let model = scalar(0.0, 1.0, 1.0);
        let mut st = GlState::new(1.0, 0.01, &[0.0], None).unwrap();
        let x1 = gl_step(&model, &mut st, 1.0).unwrap();
        assert_eq!(x1, vec![0.01]);
    }

    #[test]
    fn exponential_decay() {
        let model = scalar(-1.0, 0.0, 1.0);
        let h = 1e-4;
        let mut st = GlState::new(1.0, h, &[1.0], None).unwrap();
        for _ in 0..10_000 {
            gl_step(&model, &mut st, 0.0).unwrap();
        }
        assert_abs_diff_eq!(st.current()[0], (-1.0f64).exp(), epsilon = 1e-3);
    }

    #[test]
    fn mismatched_model() {
        let model = scalar(0.0, 1.0, 0.5);
        let mut st = GlState::new(1.0, 0.01, &[0.0], None).unwrap();
        assert!(matches!(gl_step(&model, &mut st, 1.0), Err(FodeError::HistoryMismatch(_))));
        let mut st = GlState::new(0.5, 0.01, &[0.0, 0.0], None).unwrap();
        assert!(matches!(gl_step(&model, &mut st, 1.0), Err(FodeError::HistoryMismatch(_))));
    }

    #[test]
    fn bounded_memory_keeps_at_most_l_samples() {
        let model = scalar(0.0, 1.0, 0.5);
        let mut st = GlState::new(0.5, 0.01, &[0.0], Some(5)).unwrap();
        for _ in 0..3000 {
            gl_step(&model, &mut st, 1.0).unwrap();
            assert!(st.len() <= 5);
        }
    }

    #[test]
    fn clear_memory_on_all_components() {
        let model = StateSpaceModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::from_element(1, 2, 1.0),
            0.5,
        )
        .unwrap();
        let mut st = GlState::new(0.5, 0.1, &[0.0, 0.0], None).unwrap();
        for _ in 0..10 {
            gl_step(&model, &mut st, 1.0).unwrap();
        }
        let st = reset_history(st, &[0, 1], MemoryMode::Clear).unwrap();
        for k in 0..st.len() {
            assert_eq!(st.sample(k), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn keep_memory_on_empty_set_is_identity() {
        let model = scalar(0.0, 1.0, 0.5);
        let mut st = GlState::new(0.5, 0.1, &[0.0], None).unwrap();
        for _ in 0..10 {
            gl_step(&model, &mut st, 1.0).unwrap();
        }
        let before: Vec<_> = (0..st.len()).map(|k| st.sample(k)).collect();
        let st = reset_history(st, &[], MemoryMode::Keep).unwrap();
        let after: Vec<_> = (0..st.len()).map(|k| st.sample(k)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn reset_modes_zero_the_newest_sample() {
        let model = scalar(0.0, 1.0, 0.5);
        for mode in [MemoryMode::Clear, MemoryMode::Keep, MemoryMode::Offset] {
            let mut st = GlState::new(0.5, 0.1, &[0.0], None).unwrap();
            for _ in 0..10 {
                gl_step(&model, &mut st, 1.0).unwrap();
            }
            st.reset(&[0], mode).unwrap();
            assert_eq!(st.current(), vec![0.0], "{mode}");
        }
    }

    #[test]
    fn offset_mode_preserves_increments() {
        // After an offset reset the trajectory is the un-reset one shifted by a constant.
        let model = scalar(0.0, 1.0, 0.5);
        let mut plain = GlState::new(0.5, 0.1, &[0.0], None).unwrap();
        let mut shifted = GlState::new(0.5, 0.1, &[0.0], None).unwrap();
        for _ in 0..10 {
            gl_step(&model, &mut plain, 1.0).unwrap();
            gl_step(&model, &mut shifted, 1.0).unwrap();
        }
        let c = shifted.current()[0];
        shifted.reset(&[0], MemoryMode::Offset).unwrap();
        for _ in 0..10 {
            let a = gl_step(&model, &mut plain, 1.0).unwrap()[0];
            let b = gl_step(&model, &mut shifted, 1.0).unwrap()[0];
            assert_abs_diff_eq!(a - c, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn out_of_range_index() {
        let mut st = GlState::new(0.5, 0.1, &[0.0], None).unwrap();
        assert_eq!(
            st.reset(&[1], MemoryMode::Clear).unwrap_err(),
            FodeError::IndexOutOfRange { index: 1, dim: 1 }
        );
    }

    #[test]
    fn memory_mode_parsing() {
        assert_eq!("clear".parse::<MemoryMode>().unwrap(), MemoryMode::Clear);
        assert_eq!("offset".parse::<MemoryMode>().unwrap(), MemoryMode::Offset);
        assert!("forget".parse::<MemoryMode>().is_err());
        assert_eq!(MemoryMode::default(), MemoryMode::Offset);
    }
}
