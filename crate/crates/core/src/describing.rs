//! Describing functions of integrator-type reset elements.
//!
//! The first-harmonic definition used throughout is
//!
//! ```text
//! N(A, ω) = (2jω / πA) ∫ y(t) e^{−jω(t − t₀)} dt   over t ∈ [t₀, t₀ + π/ω]
//! ```
//!
//! with `t₀` a reset instant in periodic steady state.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fode::MemoryMode;
pub use crate::models::ElementKind;
use crate::models::{ModelError, ResetElement};
use crate::simreset::{simulate_element, Reference, SimError, DEFAULT_DETECTION_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DfError {
    #[error("fractional order {0} is outside (0, 1]")]
    InvalidOrder(f64),
    #[error("frequency {0} must be positive")]
    InvalidFrequency(f64),
    #[error("invalid describing-function request: {0}")]
    InvalidInput(String),
    #[error("response not periodic: last two cycles differ in RMS by {0:.2}%")]
    NotPeriodic(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn check_order(order: f64) -> Result<(), DfError> {
    if order > 0.0 && order <= 1.0 {
        Ok(())
    } else {
        Err(DfError::InvalidOrder(order))
    }
}

fn check_frequency(omega: f64) -> Result<(), DfError> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(DfError::InvalidFrequency(omega))
    }
}

/// FORE `K/(s + b)`:
/// `K/(b + jω) · (1 + j·2ω²(1 + e^{−bπ/ω}) / (π(b² + ω²)))`.
pub fn df_fore(gain: f64, pole: f64, omega: f64) -> Complex64 {
    let w2 = omega * omega;
    let lead = 2.0 * w2 * (1.0 + (-pole * PI / omega).exp()) / (PI * (pole * pole + w2));
    gain / Complex64::new(pole, omega) * Complex64::new(1.0, lead)
}

/// Clegg integrator: `4/(πω) · (1 − jπ/4)`.
pub fn df_ci(omega: f64) -> Complex64 {
    4.0 / (PI * omega) * Complex64::new(1.0, -FRAC_PI_4)
}

/// Fractional Clegg integrator:
/// `4/(πω^α) · (sin(απ/2) + (π/4) e^{−jαπ/2})`.
pub fn df_fci(order: f64, omega: f64) -> Result<Complex64, DfError> {
    check_order(order)?;
    let phi = order * FRAC_PI_2;
    let bracket = Complex64::new(phi.sin(), 0.0) + FRAC_PI_4 * Complex64::from_polar(1.0, -phi);
    Ok(4.0 / (PI * omega.powf(order)) * bracket)
}

/// Fractional integrator frequency response `(jω)^{−α}`.
pub fn df_fi(order: f64, omega: f64) -> Result<Complex64, DfError> {
    check_order(order)?;
    Ok(Complex64::from_polar(omega.powf(-order), -order * FRAC_PI_2))
}

/// Closed-form describing function of any element kind.
pub fn describing_function(kind: ElementKind, omega: f64) -> Result<Complex64, DfError> {
    check_frequency(omega)?;
    Ok(match kind {
        ElementKind::Ci => df_ci(omega),
        ElementKind::Fore { gain, pole } => df_fore(gain, pole, omega),
        ElementKind::Fci { order } => df_fci(order, omega)?,
        ElementKind::Fi { order } => df_fi(order, omega)?,
        ElementKind::Ii => Complex64::new(0.0, -1.0 / omega),
    })
}

/// Element whose phase lead over `1/s` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadElement {
    Fci,
    Fi,
}

/// Phase lead over the integer integrator, degrees (independent of ω).
///
/// FCI: `90° + arg N_FCI`; FI: `(1 − α)·90°`.
pub fn phase_lead(kind: LeadElement, order: f64) -> Result<f64, DfError> {
    check_order(order)?;
    Ok(match kind {
        LeadElement::Fci => 90.0 + df_fci(order, 1.0)?.arg().to_degrees(),
        LeadElement::Fi => (1.0 - order) * 90.0,
    })
}

/// One row of a DF table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescribingFunctionPoint {
    pub kind: ElementKind,
    pub amplitude: f64,
    pub omega: f64,
    pub value: Complex64,
}

impl DescribingFunctionPoint {
    pub fn mag_db(&self) -> f64 {
        20.0 * self.value.norm().log10()
    }

    pub fn phase_deg(&self) -> f64 {
        self.value.arg().to_degrees()
    }
}

/// Closed-form DF over log-spaced frequencies.
pub fn df_table(kind: ElementKind, omega_min: f64, omega_max: f64, points: usize) -> Result<Vec<DescribingFunctionPoint>, DfError> {
    check_frequency(omega_min)?;
    check_frequency(omega_max)?;
    if points < 2 || omega_max < omega_min {
        return Err(DfError::InvalidInput(format!(
            "need points >= 2 and omega_min <= omega_max (got {points}, {omega_min}, {omega_max})"
        )));
    }
    log_space(omega_min, omega_max, points)
        .into_iter()
        .map(|omega| {
            Ok(DescribingFunctionPoint {
                kind,
                amplitude: 1.0,
                omega,
                value: describing_function(kind, omega)?,
            })
        })
        .collect()
}

pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

/// `kind,alpha,omega,re,im,mag_db,phase_deg`.
pub fn df_csv(points: &[DescribingFunctionPoint]) -> String {
    let mut out = String::from("kind,alpha,omega,re,im,mag_db,phase_deg\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.kind.label(),
            p.kind.order(),
            p.omega,
            p.value.re,
            p.value.im,
            p.mag_db(),
            p.phase_deg()
        ));
    }
    out
}

/// Settings of the simulation-based DF estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalDfConfig {
    pub cycles: usize,
    pub memory_mode: MemoryMode,
    /// Relative RMS difference allowed between the last two cycles.
    pub periodicity_tol: f64,
}

impl Default for NumericalDfConfig {
    fn default() -> Self {
        Self {
            cycles: 10,
            memory_mode: MemoryMode::default(),
            periodicity_tol: 0.01,
        }
    }
}

/// First-harmonic DF estimate from simulating `element` under `A sin(ωt)`.
///
/// The step is shrunk so that a whole even number of samples spans one
/// period, putting the input zero crossings (and thus the resets) on the
/// grid. The half-period integral starts at the ascending zero crossing of the
/// last cycle; the mean of that cycle is removed first, which leaves
/// half-wave-symmetric outputs unchanged and drops the DC offset a
/// non-resetting integrator accumulates from rest.
pub fn numerical_df(element: &ResetElement, amplitude: f64, omega: f64, step: f64) -> Result<Complex64, DfError> {
    numerical_df_with(element, amplitude, omega, step, &NumericalDfConfig::default())
}

pub fn numerical_df_with(
    element: &ResetElement,
    amplitude: f64,
    omega: f64,
    step: f64,
    cfg: &NumericalDfConfig,
) -> Result<Complex64, DfError> {
    check_frequency(omega)?;
    if !(amplitude > 0.0) {
        return Err(DfError::InvalidInput(format!("amplitude {amplitude} must be positive")));
    }
    let period = 2.0 * PI / omega;
    if !(step > 0.0) || step > period / 1000.0 {
        return Err(DfError::InvalidInput(format!(
            "step {step} must be in (0, 2π/(1000ω)] = (0, {}]",
            period / 1000.0
        )));
    }
    if cfg.cycles < 2 {
        return Err(DfError::InvalidInput("at least two cycles are needed".into()));
    }
    let mut per_cycle = (period / step).ceil() as usize;
    per_cycle += per_cycle % 2;
    let h = period / per_cycle as f64;
    let horizon = cfg.cycles as f64 * period;

    let traj = simulate_element(
        element,
        Reference::Sinusoid {
            amplitude,
            frequency: omega,
        },
        h,
        horizon,
        cfg.memory_mode,
        DEFAULT_DETECTION_TOL,
    )?;
    let y = &traj.output;
    let last = (cfg.cycles - 1) * per_cycle;
    let prev = last - per_cycle;
    if y.len() < last + per_cycle + 1 {
        return Err(DfError::InvalidInput("trajectory shorter than requested cycles".into()));
    }

    let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    let r_last = rms(&y[last..last + per_cycle]);
    let r_prev = rms(&y[prev..last]);
    let drift = (r_last - r_prev).abs() / r_last.max(f64::MIN_POSITIVE);
    if drift > cfg.periodicity_tol {
        return Err(DfError::NotPeriodic(100.0 * drift));
    }

    let mean = y[last..last + per_cycle].iter().sum::<f64>() / per_cycle as f64;
    let half = per_cycle / 2;
    let t0 = traj.times[last];
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..half {
        let (ta, tb) = (traj.times[last + k] - t0, traj.times[last + k + 1] - t0);
        let fa = (y[last + k] - mean) * Complex64::from_polar(1.0, -omega * ta);
        let fb = (y[last + k + 1] - mean) * Complex64::from_polar(1.0, -omega * tb);
        acc += 0.5 * (tb - ta) * (fa + fb);
    }
    Ok(Complex64::new(0.0, 2.0 * omega / (PI * amplitude)) * acc)
}
