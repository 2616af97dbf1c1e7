//! State-space data model of fractional reset loops.
//!
//! All subsystems share one commensurate order `α`:
//!
//! ```text
//! D^α x_p = A_p x_p + B_p u_c,        y   = C_p x_p
//! D^α x_c = A_c x_c + B_c u_r,        u_c = C_c x_c
//! D^α x_r = A_r x_r + B_r e,          u_r = C_r x_r,   x_r⁺ = A_Rr x_r when e = 0
//! ```
//!
//! closed as `x = [x_p; x_c; x_r]` with `e = r − y`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{poly_mul, LinalgError};

/// Tolerance of the algebraic reset-surface test.
pub const SURFACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("fractional order {0} is outside (0, 1]")]
    InvalidOrder(f64),
    #[error("1/{0} is not a positive integer")]
    NonReciprocalOrder(f64),
    #[error("system already has fractional order {0}")]
    AlreadyFractional(f64),
    #[error("subsystem orders differ ({0} vs {1})")]
    OrderMismatch(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid reset matrix: {0}")]
    InvalidResetRule(String),
    #[error("transfer function must be strictly proper (numerator degree {num} >= denominator degree {den})")]
    ImproperTransferFunction { num: usize, den: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_order(order: f64) -> Result<(), ModelError> {
    if order > 0.0 && order <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidOrder(order))
    }
}

/// `D^α x = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    order: f64,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, order: f64) -> Result<Self, ModelError> {
        check_order(order)?;
        if !a.is_square() {
            return Err(ModelError::DimensionMismatch(format!(
                "A is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        if b.nrows() != n {
            return Err(ModelError::DimensionMismatch(format!("B has {} rows, A has {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(ModelError::DimensionMismatch(format!("C has {} columns, A has {n}", c.ncols())));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        Ok(Self { a, b, c, order })
    }

    /// Controllable canonical realization of a strictly proper `num/den`
    /// (coefficients in descending degree).
    pub fn from_transfer_function(num: &[f64], den: &[f64], order: f64) -> Result<Self, ModelError> {
        let den: Vec<f64> = den.iter().copied().skip_while(|&x| x == 0.0).collect();
        let num: Vec<f64> = num.iter().copied().skip_while(|&x| x == 0.0).collect();
        if den.is_empty() {
            return Err(LinalgError::ZeroDenominator.into());
        }
        let n = den.len() - 1;
        if num.len() > n {
            return Err(ModelError::ImproperTransferFunction {
                num: num.len().saturating_sub(1),
                den: n,
            });
        }
        let lead = den[0];
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        // Last row: −a_0 … −a_{n−1} (ascending powers).
        for j in 0..n {
            a[(n - 1, j)] = -den[n - j] / lead;
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(n - 1, 0)] = 1.0;
        }
        let mut c = DMatrix::zeros(1, n);
        for (k, &coef) in num.iter().rev().enumerate() {
            c[(0, k)] = coef / lead;
        }
        Self::new(a, b, c, order)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.b.ncols() == 1 && self.c.nrows() == 1
    }

    /// `C (λ I − A)⁻¹ B` with `λ = s^α` (principal branch), SISO only.
    pub fn transfer_at(&self, s: Complex64) -> Result<Complex64, ModelError> {
        if !self.is_siso() {
            return Err(ModelError::DimensionMismatch("transfer_at requires a SISO model".into()));
        }
        let n = self.dim();
        let lambda = if self.order == 1.0 { s } else { s.powf(self.order) };
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            d - self.a[(i, j)]
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[(i, 0)], 0.0));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(LinalgError::PoleHit(s))?;
        Ok((0..n).map(|i| x[i] * self.c[(0, i)]).sum())
    }

    pub fn frequency_response(&self, omega: f64) -> Result<Complex64, ModelError> {
        self.transfer_at(Complex64::new(0.0, omega))
    }
}

/// Rewrites an integer-order model as a commensurate order-`α` model.
///
/// With `p = 1/α`, the state is stacked `p` times; identity blocks sit on the
/// block super-diagonal, `A` in the bottom-left block, `B` in the last block
/// row and `C` in the first block column.
pub fn augment_integer_order(sys: &StateSpaceModel, target_order: f64) -> Result<StateSpaceModel, ModelError> {
    if sys.order != 1.0 {
        return Err(ModelError::AlreadyFractional(sys.order));
    }
    check_order(target_order)?;
    let p = reciprocal_integer(target_order)?;
    if p == 1 {
        return Ok(sys.clone());
    }
    let n = sys.dim();
    let m = sys.b.ncols();
    let q = sys.c.nrows();
    let mut a = DMatrix::zeros(p * n, p * n);
    for blk in 0..p - 1 {
        for i in 0..n {
            a[(blk * n + i, (blk + 1) * n + i)] = 1.0;
        }
    }
    a.view_mut(((p - 1) * n, 0), (n, n)).copy_from(&sys.a);
    let mut b = DMatrix::zeros(p * n, m);
    b.view_mut(((p - 1) * n, 0), (n, m)).copy_from(&sys.b);
    let mut c = DMatrix::zeros(q, p * n);
    c.view_mut((0, 0), (q, n)).copy_from(&sys.c);
    StateSpaceModel::new(a, b, c, target_order)
}

/// `1/α` as an integer, or [`ModelError::NonReciprocalOrder`].
pub fn reciprocal_integer(order: f64) -> Result<usize, ModelError> {
    check_order(order)?;
    let p = 1.0 / order;
    let r = p.round();
    if (p - r).abs() > 1e-9 * p {
        return Err(ModelError::NonReciprocalOrder(order));
    }
    Ok(r as usize)
}

/// Finest commensurate order of a set of orders, `1/lcm(1/α_i)`.
pub fn common_order(orders: &[f64]) -> Result<f64, ModelError> {
    let mut l = 1usize;
    for &o in orders {
        let p = reciprocal_integer(o)?;
        l = lcm(l, p);
    }
    Ok(1.0 / l as f64)
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Reset matrix `A_Rr = blockdiag(I_{n_R̄}, 0_{n_R})`: the last `n_R` states reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetRule {
    n_nonreset: usize,
    n_reset: usize,
}

impl ResetRule {
    pub fn new(n_nonreset: usize, n_reset: usize) -> Self {
        Self { n_nonreset, n_reset }
    }

    /// A rule that never changes the state.
    pub fn identity(n: usize) -> Self {
        Self::new(n, 0)
    }

    /// Validates a matrix of the form `blockdiag(I, 0)`.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, ModelError> {
        if !m.is_square() {
            return Err(ModelError::InvalidResetRule("matrix is not square".into()));
        }
        let n = m.nrows();
        let mut n_nonreset = 0;
        let mut seen_zero = false;
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if i != j && v != 0.0 {
                    return Err(ModelError::InvalidResetRule(format!("off-diagonal entry ({i},{j}) = {v}")));
                }
            }
            match m[(i, i)] {
                1.0 if !seen_zero => n_nonreset += 1,
                1.0 => {
                    return Err(ModelError::InvalidResetRule(
                        "reset states must be the trailing block".into(),
                    ))
                }
                0.0 => seen_zero = true,
                v => return Err(ModelError::InvalidResetRule(format!("diagonal entry {v} not in {{0,1}}"))),
            }
        }
        Ok(Self::new(n_nonreset, n - n_nonreset))
    }

    pub fn dim(&self) -> usize {
        self.n_nonreset + self.n_reset
    }

    pub fn n_reset(&self) -> usize {
        self.n_reset
    }

    pub fn n_nonreset(&self) -> usize {
        self.n_nonreset
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| if i == j && i < self.n_nonreset { 1.0 } else { 0.0 })
    }
}

/// Which closed-loop state indices belong to which subsystem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub plant: Range<usize>,
    pub controller: Range<usize>,
    pub reset_controller: Range<usize>,
    pub reset_states: Vec<usize>,
}

/// Closed loop `D^α x = A_cl x + B_cl r`, `x⁺ = A_R x` on the reset surface,
/// `y = C_cl x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopResetSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    control: DMatrix<f64>,
    reset: DMatrix<f64>,
    order: f64,
    layout: StateLayout,
}

impl ClosedLoopResetSystem {
    /// Direct construction from matrices.
    ///
    /// `control` is the row producing the reset controller output `u_r`.
    /// The reset matrix must be diagonal with entries in {0, 1}; its zero
    /// entries define the reset states.
    pub fn from_parts(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        control: DMatrix<f64>,
        reset: DMatrix<f64>,
        order: f64,
        layout: Option<StateLayout>,
    ) -> Result<Self, ModelError> {
        check_order(order)?;
        let n = a.nrows();
        if !a.is_square() || b.shape() != (n, 1) || c.shape() != (1, n) || control.shape() != (1, n) {
            return Err(ModelError::DimensionMismatch(format!(
                "A {:?}, B {:?}, C {:?}, control {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                control.shape()
            )));
        }
        if reset.shape() != (n, n) {
            return Err(ModelError::InvalidResetRule(format!("A_R is {:?}, expected {n}x{n}", reset.shape())));
        }
        let mut reset_states = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = reset[(i, j)];
                let ok = if i == j { v == 0.0 || v == 1.0 } else { v == 0.0 };
                if !ok {
                    return Err(ModelError::InvalidResetRule(format!("entry ({i},{j}) = {v}")));
                }
            }
            if reset[(i, i)] == 0.0 {
                reset_states.push(i);
            }
        }
        let layout = match layout {
            Some(l) => {
                if l.reset_states != reset_states {
                    return Err(ModelError::InvalidResetRule("layout disagrees with A_R".into()));
                }
                l
            }
            None => StateLayout {
                plant: 0..n,
                controller: n..n,
                reset_controller: n..n,
                reset_states,
            },
        };
        Ok(Self {
            a,
            b,
            c,
            control,
            reset,
            order,
            layout,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Row mapping the state to the reset controller output `u_r`.
    pub fn control_row(&self) -> &DMatrix<f64> {
        &self.control
    }

    /// Lifted reset matrix `A_R`.
    pub fn reset_matrix(&self) -> &DMatrix<f64> {
        &self.reset
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn reset_states(&self) -> &[usize] {
        &self.layout.reset_states
    }

    /// Flow dynamics as a plain state-space model (input `r`, output `y`).
    pub fn flow_model(&self) -> StateSpaceModel {
        StateSpaceModel {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            order: self.order,
        }
    }

    /// Same loop with resets disabled (`A_R = I`).
    pub fn without_reset(&self) -> Self {
        let n = self.dim();
        let mut out = self.clone();
        out.reset = DMatrix::identity(n, n);
        out.layout.reset_states.clear();
        out
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        row_dot(&self.c, x)
    }

    pub fn control(&self, x: &[f64]) -> f64 {
        row_dot(&self.control, x)
    }
}

fn row_dot(row: &DMatrix<f64>, x: &[f64]) -> f64 {
    row.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Closes the loop of a plant, an optional linear controller and a reset
/// controller with negative unity feedback.
pub fn assemble_closed_loop(
    plant: &StateSpaceModel,
    linear: Option<&StateSpaceModel>,
    reset_ctrl: &StateSpaceModel,
    rule: &ResetRule,
) -> Result<ClosedLoopResetSystem, ModelError> {
    let order = plant.order;
    for sub in linear.into_iter().chain(std::iter::once(reset_ctrl)) {
        if sub.order != order {
            return Err(ModelError::OrderMismatch(order, sub.order));
        }
    }
    for (name, sub) in [("plant", Some(plant)), ("controller", linear), ("reset controller", Some(reset_ctrl))] {
        if let Some(s) = sub {
            if !s.is_siso() {
                return Err(ModelError::DimensionMismatch(format!("{name} is not SISO")));
            }
        }
    }
    let nr = reset_ctrl.dim();
    if nr == 0 {
        return Err(ModelError::DimensionMismatch("reset controller has no states".into()));
    }
    if rule.dim() != nr {
        return Err(ModelError::DimensionMismatch(format!(
            "reset rule covers {} states, reset controller has {nr}",
            rule.dim()
        )));
    }
    let np = plant.dim();
    let nc = linear.map_or(0, StateSpaceModel::dim);
    let n = np + nc + nr;
    let (p0, c0, r0) = (0, np, np + nc);

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((p0, p0), (np, np)).copy_from(&plant.a);
    match linear {
        Some(lin) => {
            a.view_mut((p0, c0), (np, nc)).copy_from(&(&plant.b * &lin.c));
            a.view_mut((c0, c0), (nc, nc)).copy_from(&lin.a);
            a.view_mut((c0, r0), (nc, nr)).copy_from(&(&lin.b * &reset_ctrl.c));
        }
        None => {
            a.view_mut((p0, r0), (np, nr)).copy_from(&(&plant.b * &reset_ctrl.c));
        }
    }
    a.view_mut((r0, p0), (nr, np)).copy_from(&(-(&reset_ctrl.b * &plant.c)));
    a.view_mut((r0, r0), (nr, nr)).copy_from(&reset_ctrl.a);

    let mut b = DMatrix::zeros(n, 1);
    b.view_mut((r0, 0), (nr, 1)).copy_from(&reset_ctrl.b);
    let mut c = DMatrix::zeros(1, n);
    c.view_mut((0, p0), (1, np)).copy_from(&plant.c);
    let mut control = DMatrix::zeros(1, n);
    control.view_mut((0, r0), (1, nr)).copy_from(&reset_ctrl.c);

    let mut reset = DMatrix::identity(n, n);
    reset.view_mut((r0, r0), (nr, nr)).copy_from(&rule.matrix());

    let layout = StateLayout {
        plant: p0..np,
        controller: c0..c0 + nc,
        reset_controller: r0..n,
        reset_states: (r0 + rule.n_nonreset()..n).collect(),
    };
    ClosedLoopResetSystem::from_parts(a, b, c, control, reset, order, Some(layout))
}

/// Closes the loop around `element`, first augmenting integer-order plant and
/// controller realizations to the element's order.
///
/// The element's order must be the finest order in the loop.
pub fn close_loop(
    plant: &StateSpaceModel,
    linear: Option<&StateSpaceModel>,
    element: &ResetElement,
) -> Result<ClosedLoopResetSystem, ModelError> {
    let target = element.model.order;
    let mut orders = vec![plant.order, target];
    orders.extend(linear.map(|l| l.order));
    let finest = common_order(&orders)?;
    if (finest - target).abs() > 1e-12 {
        return Err(ModelError::OrderMismatch(target, finest));
    }
    let lift = |sys: &StateSpaceModel| {
        if sys.order == target {
            Ok(sys.clone())
        } else {
            augment_integer_order(sys, target)
        }
    };
    let plant = lift(plant)?;
    let linear = linear.map(lift).transpose()?;
    assemble_closed_loop(&plant, linear.as_ref(), &element.model, &element.rule)
}

/// `|C_cl x| ≤ tol` and `‖(I − A_R) x‖∞ > tol`.
pub fn on_reset_surface(sys: &ClosedLoopResetSystem, x: &[f64], tol: f64) -> bool {
    assert_eq!(x.len(), sys.dim(), "state dimension");
    let y = sys.output(x);
    let jump = sys.reset_states().iter().map(|&i| x[i].abs()).fold(0.0, f64::max);
    y.abs() <= tol && jump > tol
}

/// Kind of integrator-type element, as used by describing functions and
/// scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementKind {
    /// Clegg integrator `1/s` with zero-crossing reset.
    Ci,
    /// First-order reset element `K/(s + b)`.
    Fore { gain: f64, pole: f64 },
    /// Fractional Clegg integrator `1/s^α` with zero-crossing reset.
    Fci { order: f64 },
    /// Fractional integrator `1/s^α` (linear).
    Fi { order: f64 },
    /// Integer-order integrator `1/s` (linear).
    Ii,
}

impl ElementKind {
    pub fn order(&self) -> f64 {
        match *self {
            ElementKind::Fci { order } | ElementKind::Fi { order } => order,
            _ => 1.0,
        }
    }

    pub fn resets(&self) -> bool {
        matches!(self, ElementKind::Ci | ElementKind::Fore { .. } | ElementKind::Fci { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ElementKind::Ci => "CI",
            ElementKind::Fore { .. } => "FORE",
            ElementKind::Fci { .. } => "FCI",
            ElementKind::Fi { .. } => "FI",
            ElementKind::Ii => "II",
        }
    }
}

/// A single-state reset (or linear) compensator with its reset rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetElement {
    pub kind: ElementKind,
    pub model: StateSpaceModel,
    pub rule: ResetRule,
}

impl ResetElement {
    pub fn new(kind: ElementKind) -> Result<Self, ModelError> {
        check_order(kind.order())?;
        let (a, c) = match kind {
            ElementKind::Fore { gain, pole } => (-pole, gain),
            _ => (0.0, 1.0),
        };
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, c),
            kind.order(),
        )?;
        let rule = if kind.resets() {
            ResetRule::new(0, 1)
        } else {
            ResetRule::identity(1)
        };
        Ok(Self { kind, model, rule })
    }

    /// Multiplies the output row by `gain`.
    pub fn scaled(mut self, gain: f64) -> Self {
        self.model.c *= gain;
        self
    }
}

/// Series product of two transfer functions given as (num, den) pairs.
pub fn series_tf(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> (Vec<f64>, Vec<f64>) {
    (poly_mul(a.0, b.0), poly_mul(a.1, b.1))
}
