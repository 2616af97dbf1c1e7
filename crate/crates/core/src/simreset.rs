//! Fixed-step simulation of closed reset loops and step-response metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fode::{flow_rhs, FodeError, GlState, MemoryMode};
use crate::models::{ClosedLoopResetSystem, ResetElement};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_DETECTION_TOL: f64 = 1e-9;
pub const DIVERGENCE_LIMIT: f64 = 1e12;
pub const MAX_STEPS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state diverged (|x| > {DIVERGENCE_LIMIT:e}) at t = {time}")]
    Divergence { time: f64, partial: Box<Trajectory> },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("final value is zero; overshoot is undefined")]
    ZeroFinalValue,
    #[error(transparent)]
    Fode(#[from] FodeError),
}

/// Reference (or element input) signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Reference {
    Constant { value: f64 },
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl Reference {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Reference::Constant { value } => value,
            Reference::Sinusoid { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub step: f64,
    pub horizon: f64,
    pub reference: Reference,
    pub memory_mode: MemoryMode,
    pub detection_tol: f64,
    /// Short-memory length in samples; `None` keeps the full history.
    pub memory_length: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            horizon: 30.0,
            reference: Reference::Constant { value: 1.0 },
            memory_mode: MemoryMode::default(),
            detection_tol: DEFAULT_DETECTION_TOL,
            memory_length: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<usize, SimError> {
        let (h, t) = (self.step, self.horizon);
        if !(h > 0.0 && h.is_finite() && t.is_finite() && h < t) {
            return Err(SimError::InvalidConfig(format!("need 0 < step < horizon (step {h}, horizon {t})")));
        }
        let steps = (t / h).round();
        if steps > MAX_STEPS {
            return Err(SimError::InvalidConfig(format!("{steps} steps exceeds {MAX_STEPS:e}")));
        }
        if !(self.detection_tol >= 0.0) {
            return Err(SimError::InvalidConfig("detection tolerance must be non-negative".into()));
        }
        Ok(steps as usize)
    }
}

/// Sampled closed-loop response.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub output: Vec<f64>,
    pub control: Vec<f64>,
    pub resets: Vec<f64>,
    /// Grid indices of `resets`.
    pub reset_indices: Vec<usize>,
    /// Error signal `e = r − y` before any reset at that grid point.
    pub error: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn record(&mut self, t: f64, x: Vec<f64>, y: f64, u: f64, e: f64) {
        self.times.push(t);
        self.states.push(x);
        self.output.push(y);
        self.control.push(u);
        self.error.push(e);
    }
}

/// Zero-crossing reset detector with the one-step re-reset guard.
#[derive(Debug, Clone)]
struct CrossingDetector {
    tol: f64,
    prev: f64,
    guard: bool,
}

impl CrossingDetector {
    fn new(tol: f64, e0: f64) -> Self {
        Self {
            tol,
            prev: e0,
            guard: false,
        }
    }

    /// Whether a reset is due at the sample with error `e`; `armed` is the
    /// (I − A_R) x ≠ 0 clause.
    fn check(&mut self, e: f64, armed: bool) -> bool {
        let crossed = self.prev * e < 0.0 || e.abs() <= self.tol;
        let fire = crossed && armed && !self.guard;
        self.prev = e;
        self.guard = fire;
        fire
    }
}

/// Simulates the loop from `x(0) = 0`.
///
/// Between resets the state advances by one GL step per grid point. A reset
/// fires at `t_{k+1}` when `e = r − y` changed sign over `[t_k, t_{k+1}]` or
/// `|e(t_{k+1})|` is within the detection tolerance, and some reset state is
/// nonzero. No reset may fire on the step right after another.
pub fn simulate(sys: &ClosedLoopResetSystem, cfg: &SimulationConfig) -> Result<Trajectory, SimError> {
    let steps = cfg.validate()?;
    let n = sys.dim();
    let h = cfg.step;
    let reset_states = sys.reset_states().to_vec();
    let mut gl = GlState::new(sys.order(), h, &vec![0.0; n], cfg.memory_length)?;

    let mut traj = Trajectory::default();
    let x0 = gl.current();
    let y0 = sys.output(&x0);
    let e0 = cfg.reference.at(0.0) - y0;
    traj.record(0.0, x0.clone(), y0, sys.control(&x0), e0);
    let mut detector = CrossingDetector::new(cfg.detection_tol, e0);
    let mut x = x0;

    for k in 0..steps {
        let t = k as f64 * h;
        let rhs = flow_rhs(sys.a(), sys.b(), &x, cfg.reference.at(t));
        x = gl.advance_with(&rhs)?;
        let t_next = (k + 1) as f64 * h;
        let y = sys.output(&x);
        let e = cfg.reference.at(t_next) - y;

        let armed = reset_states.iter().any(|&i| x[i] != 0.0);
        if detector.check(e, armed) {
            gl.reset(&reset_states, cfg.memory_mode)?;
            x = gl.current();
            traj.resets.push(t_next);
            traj.reset_indices.push(k + 1);
        }

        let y = sys.output(&x);
        traj.record(t_next, x.clone(), y, sys.control(&x), e);

        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(SimError::Divergence {
                time: t_next,
                partial: Box::new(traj),
            });
        }
    }
    Ok(traj)
}

/// Open-loop response of a single element to `input(t)`; the reset law is
/// driven by the element input crossing zero.
pub fn simulate_element(
    element: &ResetElement,
    input: Reference,
    step: f64,
    horizon: f64,
    memory_mode: MemoryMode,
    detection_tol: f64,
) -> Result<Trajectory, SimError> {
    let cfg = SimulationConfig {
        step,
        horizon,
        reference: input,
        memory_mode,
        detection_tol,
        memory_length: None,
    };
    let steps = cfg.validate()?;
    let model = &element.model;
    let n = model.dim();
    let c = model.c();
    let output = |x: &[f64]| -> f64 { x.iter().enumerate().map(|(j, v)| c[(0, j)] * v).sum() };
    let reset_states: Vec<usize> = (element.rule.n_nonreset()..element.rule.dim()).collect();
    let mut gl = GlState::new(model.order(), step, &vec![0.0; n], None)?;

    let mut traj = Trajectory::default();
    let mut x = gl.current();
    let u0 = input.at(0.0);
    traj.record(0.0, x.clone(), output(&x), output(&x), u0);
    let mut detector = CrossingDetector::new(detection_tol, u0);

    for k in 0..steps {
        let rhs = flow_rhs(model.a(), model.b(), &x, input.at(k as f64 * step));
        x = gl.advance_with(&rhs)?;
        let t_next = (k + 1) as f64 * step;
        let u = input.at(t_next);
        let armed = reset_states.iter().any(|&i| x[i] != 0.0);
        if detector.check(u, armed) {
            gl.reset(&reset_states, memory_mode)?;
            x = gl.current();
            traj.resets.push(t_next);
            traj.reset_indices.push(k + 1);
        }
        let y = output(&x);
        traj.record(t_next, x.clone(), y, y, u);
    }
    Ok(traj)
}

/// Step-response figures of merit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// `(max y − y_∞)/y_∞` as a fraction.
    pub overshoot: f64,
    pub peak_time: f64,
    /// Time after which `y` stays within 2% of `y_∞`; `None` if never.
    pub settling_time: Option<f64>,
    pub final_value: f64,
    pub steady_state_error: f64,
}

/// Fraction of trailing samples averaged into `y_∞`.
pub const FINAL_VALUE_FRACTION: f64 = 0.05;
pub const SETTLING_BAND: f64 = 0.02;

/// Overshoot, peak time, 2% settling time and steady-state error on the
/// stored grid. `y_∞` is the mean of the final 5% of samples.
pub fn step_metrics(traj: &Trajectory, reference: f64) -> Result<StepMetrics, SimError> {
    let y = &traj.output;
    if y.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    let tail = ((y.len() as f64 * FINAL_VALUE_FRACTION).ceil() as usize).clamp(1, y.len());
    let final_value = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
    if final_value == 0.0 {
        return Err(SimError::ZeroFinalValue);
    }
    let (peak_idx, peak) = y
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let overshoot = ((peak - final_value) / final_value).max(0.0);

    let band = SETTLING_BAND * final_value.abs();
    let settling_time = match y.iter().rposition(|v| (v - final_value).abs() > band) {
        None => Some(traj.times[0]),
        Some(last) if last + 1 < y.len() => Some(traj.times[last + 1]),
        Some(_) => None,
    };
    Ok(StepMetrics {
        overshoot,
        peak_time: traj.times[peak_idx],
        settling_time,
        final_value,
        steady_state_error: reference - final_value,
    })
}

/// `t,y,u_r,x_0..x_{n-1}` with every value printed to 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut out = String::from("t,y,u_r");
    for j in 0..n {
        out.push_str(&format!(",x_{j}"));
    }
    out.push('\n');
    for k in 0..traj.len() {
        out.push_str(&fmt17(traj.times[k]));
        out.push(',');
        out.push_str(&fmt17(traj.output[k]));
        out.push(',');
        out.push_str(&fmt17(traj.control[k]));
        for v in &traj.states[k] {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    out
}

/// IEEE double in scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
