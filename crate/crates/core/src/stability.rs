//! Frequency-domain stability certificates for reset loops.
//!
//! The fractional flow `D^α x = A x` is mapped onto an integer-order flow
//! `ẋ = 𝒜 x` with `𝒜 = −(−A)^{1/(2−α)}`. A certificate is sought as a value of
//! `β` for which
//!
//! ```text
//! H_β(s) = [β C_cl + P_R e_R] (sI − 𝒜)^{−1} e_R
//! ```
//!
//! is strictly positive real (`e_R` selects the reset state). A quadratic
//! Lyapunov probe with `Q = I` is offered as a cheap cross-check.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::describing::log_space;
use crate::models::ClosedLoopResetSystem;
use crate::numcore::{
    eig, is_positive_definite, lyapunov_solve, matrix_fractional_power, poly_roots, ComplexMatrix, LinalgError,
    RationalFunction,
};

/// Coarse β scan step.
pub const BETA_SCAN_STEP: f64 = 0.01;
/// Width below which bisection of an interval endpoint stops.
pub const BETA_REFINE_TOL: f64 = 1e-3;
/// Eigenvalues with real part above `−HURWITZ_MARGIN` count as unstable.
pub const HURWITZ_MARGIN: f64 = 1e-9;
/// Largest eigenvalue of `A_Rᵀ P A_R − P` accepted as non-positive.
pub const JUMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("flow generator has eigenvalue {0} with non-negative real part")]
    UnstableFlow(Complex64),
    #[error("fractional transform is genuinely complex (max |imag| = {0:.3e})")]
    ComplexTransform(f64),
    #[error("loop has no reset states")]
    NoResetStates,
    #[error("only a single reset state is supported, loop has {0}")]
    MultipleResetStates(usize),
    #[error("P_R = {0} must be positive")]
    InvalidResetWeight(f64),
    #[error("denominator has root {0} outside the open left half-plane")]
    NonHurwitzDenominator(Complex64),
    #[error("transfer function is not strictly proper (numerator degree {num}, denominator degree {den})")]
    ImproperTransferFunction { num: usize, den: usize },
    #[error("invalid β range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Integer-order generator `𝒜 = −(−A_cl)^{1/(2−α)}` of the loop's flow.
///
/// Fails unless the result is real (to relative precision) and Hurwitz.
pub fn flow_generator(sys: &ClosedLoopResetSystem) -> Result<DMatrix<f64>, StabilityError> {
    let g = transformed(sys)?;
    check_hurwitz(&g)?;
    Ok(g)
}

fn transformed(sys: &ClosedLoopResetSystem) -> Result<DMatrix<f64>, StabilityError> {
    let cm = matrix_fractional_power(&ComplexMatrix::from_real(sys.a())?, sys.order())?;
    cm.to_real().ok_or_else(|| StabilityError::ComplexTransform(cm.max_abs_imag()))
}

fn check_hurwitz(m: &DMatrix<f64>) -> Result<(), StabilityError> {
    let e = eig(&ComplexMatrix::from_real(m)?)?;
    match e.values.iter().find(|v| v.re >= -HURWITZ_MARGIN) {
        Some(&v) => Err(StabilityError::UnstableFlow(v)),
        None => Ok(()),
    }
}

/// Characteristic polynomial and adjugate terms of `sI − M`.
///
/// Returns `(den, terms)` where `den` is monic, descending, and
/// `adj(sI − M) = Σ_k terms[k] s^{n−1−k}`.
pub fn resolvent_expansion(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = m.nrows();
    let mut den = vec![1.0];
    let mut terms = Vec::with_capacity(n);
    let mut current = DMatrix::identity(n, n);
    for k in 1..=n {
        let am = m * &current;
        let coeff = -am.trace() / k as f64;
        den.push(coeff);
        terms.push(current);
        current = am + DMatrix::identity(n, n) * coeff;
    }
    (den, terms)
}

/// `H_β` with its numerator split as `num0 + β·num1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HBeta {
    pub num0: Vec<f64>,
    pub num1: Vec<f64>,
    pub den: Vec<f64>,
}

impl HBeta {
    pub fn at(&self, beta: f64) -> RationalFunction {
        let num = self.num0.iter().zip(&self.num1).map(|(a, b)| a + beta * b).collect();
        RationalFunction {
            num,
            den: self.den.clone(),
        }
    }
}

/// Builds `H_β` for the single reset state of `sys` with reset weight `p_r`.
pub fn h_beta(sys: &ClosedLoopResetSystem, p_r: f64) -> Result<HBeta, StabilityError> {
    let g = flow_generator(sys)?;
    h_beta_from_generator(&g, sys.c(), sys.reset_states(), p_r)
}

/// Same as [`h_beta`] for an explicit generator, output row and reset states.
pub fn h_beta_from_generator(
    generator: &DMatrix<f64>,
    output: &DMatrix<f64>,
    reset_states: &[usize],
    p_r: f64,
) -> Result<HBeta, StabilityError> {
    let n = generator.nrows();
    let r = match reset_states {
        [] => return Err(StabilityError::NoResetStates),
        [r] => *r,
        more => return Err(StabilityError::MultipleResetStates(more.len())),
    };
    if !(p_r > 0.0 && p_r.is_finite()) {
        return Err(StabilityError::InvalidResetWeight(p_r));
    }
    if output.shape() != (1, n) || r >= n {
        return Err(LinalgError::DimensionMismatch(format!(
            "generator {n}x{n}, output {:?}, reset state {r}",
            output.shape()
        ))
        .into());
    }
    let (den, terms) = resolvent_expansion(generator);
    let mut num0 = Vec::with_capacity(n);
    let mut num1 = Vec::with_capacity(n);
    for t in &terms {
        let col = t.column(r);
        num0.push(p_r * col[r]);
        num1.push((0..n).map(|i| output[(0, i)] * col[i]).sum());
    }
    Ok(HBeta { num0, num1, den })
}

/// Frequencies at which the positivity checks are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn log(lo: f64, hi: f64, points: usize) -> Result<Self, StabilityError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
            return Err(StabilityError::InvalidGrid(format!("[{lo}, {hi}] with {points} points")));
        }
        Ok(Self {
            omegas: log_space(lo, hi, points),
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
}

impl Default for FrequencyGrid {
    /// 2000 log-spaced points on `[1e-4, 1e4]`.
    fn default() -> Self {
        Self {
            omegas: log_space(1e-4, 1e4, 2000),
        }
    }
}

/// Outcome of the phase test on one transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprVerdict {
    pub is_spr: bool,
    /// `90° − max |arg H(jω)|` over the grid.
    pub margin_deg: f64,
    pub worst_omega: f64,
    pub dc_gain: f64,
}

fn check_shape(h: &RationalFunction) -> Result<(), StabilityError> {
    let den = h.den_degree();
    if let Some(num) = h.num_degree() {
        if num >= den {
            return Err(StabilityError::ImproperTransferFunction { num, den });
        }
    }
    check_denominator(&h.den)
}

fn check_denominator(den: &[f64]) -> Result<(), StabilityError> {
    for root in poly_roots(den)? {
        if root.re >= -HURWITZ_MARGIN {
            return Err(StabilityError::NonHurwitzDenominator(root));
        }
    }
    Ok(())
}

/// The endpoint conditions shared by both tests: positive DC gain and
/// relative degree one with positive high-frequency gain.
fn endpoint_conditions(h: &RationalFunction) -> bool {
    let dc = dc_gain(h);
    dc > 0.0 && h.relative_degree() == Some(1) && h.high_frequency_gain() > 0.0
}

fn dc_gain(h: &RationalFunction) -> f64 {
    let n0 = h.num.last().copied().unwrap_or(0.0);
    let d0 = h.den.last().copied().unwrap_or(0.0);
    n0 / d0
}

/// Phase test: `|arg H(jω)| < 90°` on the grid plus the endpoint conditions.
pub fn spr_check(h: &RationalFunction, grid: &FrequencyGrid) -> Result<SprVerdict, StabilityError> {
    check_shape(h)?;
    let mut worst = (0.0f64, grid.omegas.first().copied().unwrap_or(0.0));
    for &w in &grid.omegas {
        let phase = h.eval(Complex64::new(0.0, w))?.arg().to_degrees().abs();
        if phase > worst.0 {
            worst = (phase, w);
        }
    }
    let margin_deg = 90.0 - worst.0;
    Ok(SprVerdict {
        is_spr: endpoint_conditions(h) && margin_deg > 0.0,
        margin_deg,
        worst_omega: worst.1,
        dc_gain: dc_gain(h),
    })
}

/// Real-part test: `Re H(jω) > 0` on the grid plus the endpoint conditions.
pub fn re_positive(h: &RationalFunction, grid: &FrequencyGrid) -> Result<bool, StabilityError> {
    check_shape(h)?;
    if !endpoint_conditions(h) {
        return Ok(false);
    }
    for &w in &grid.omegas {
        if h.eval(Complex64::new(0.0, w))?.re <= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All β for which `H_β` passes the real-part test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaInterval {
    /// Maximal passing runs, endpoints refined by bisection.
    pub runs: Vec<[f64; 2]>,
    pub scanned: Vec<BetaSample>,
}

impl BetaInterval {
    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn widest(&self) -> Option<[f64; 2]> {
        self.runs
            .iter()
            .copied()
            .max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
    }

    pub fn contains(&self, beta: f64) -> bool {
        self.runs.iter().any(|r| r[0] <= beta && beta <= r[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSample {
    pub beta: f64,
    pub re_positive: bool,
    pub spr: bool,
    pub margin_deg: f64,
}

/// Scans `[lo, hi]` in steps of [`BETA_SCAN_STEP`] and refines each run's
/// endpoints to [`BETA_REFINE_TOL`].
pub fn beta_interval(h: &HBeta, lo: f64, hi: f64, grid: &FrequencyGrid) -> Result<BetaInterval, StabilityError> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(StabilityError::InvalidRange(lo, hi));
    }
    check_denominator(&h.den)?;
    let steps = ((hi - lo) / BETA_SCAN_STEP).round() as usize;
    let betas: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * BETA_SCAN_STEP).collect();
    let scanned = betas
        .par_iter()
        .map(|&beta| {
            let hb = h.at(beta);
            let (re_ok, phase) = match hb.num_degree() {
                Some(_) => (re_positive(&hb, grid)?, spr_check(&hb, grid)?),
                None => (false, zero_verdict()),
            };
            Ok(BetaSample {
                beta,
                re_positive: re_ok,
                spr: phase.is_spr,
                margin_deg: phase.margin_deg,
            })
        })
        .collect::<Result<Vec<_>, StabilityError>>()?;

    let passes = |beta: f64| -> Result<bool, StabilityError> {
        let hb = h.at(beta);
        if hb.num_degree().is_none() {
            return Ok(false);
        }
        re_positive(&hb, grid)
    };
    let mut runs = Vec::new();
    let mut k = 0;
    while k < scanned.len() {
        if !scanned[k].re_positive {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < scanned.len() && scanned[k + 1].re_positive {
            k += 1;
        }
        let end = k;
        let left = if start > 0 {
            bisect(betas[start - 1], betas[start], &passes)?
        } else {
            betas[start]
        };
        let right = if end + 1 < betas.len() {
            bisect(betas[end + 1], betas[end], &passes)?
        } else {
            betas[end]
        };
        runs.push([left, right]);
        k += 1;
    }
    Ok(BetaInterval { runs, scanned })
}

fn zero_verdict() -> SprVerdict {
    SprVerdict {
        is_spr: false,
        margin_deg: f64::NAN,
        worst_omega: f64::NAN,
        dc_gain: 0.0,
    }
}

/// Moves the passing end towards the failing end; returns the passing end.
fn bisect(
    mut fail: f64,
    mut pass: f64,
    passes: &dyn Fn(f64) -> Result<bool, StabilityError>,
) -> Result<f64, StabilityError> {
    while (pass - fail).abs() > BETA_REFINE_TOL {
        let mid = 0.5 * (pass + fail);
        if passes(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovVerdict {
    /// `P ≻ 0` solves `𝒜ᵀP + P𝒜 = −I` and `A_Rᵀ P A_R − P ⪯ 0`.
    Certified,
    /// The flow is not asymptotically stable.
    NotHurwitz,
    /// `Q = I` gave no certificate; other choices of `Q` might.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProbe {
    pub verdict: LyapunovVerdict,
    pub p: Option<DMatrix<f64>>,
    /// Largest eigenvalue of `A_Rᵀ P A_R − P`.
    pub jump_max_eig: Option<f64>,
}

impl LyapunovProbe {
    pub fn certified(&self) -> bool {
        self.verdict == LyapunovVerdict::Certified
    }
}

/// Lyapunov probe on the loop's integer-order flow generator.
pub fn lyapunov_check(sys: &ClosedLoopResetSystem) -> Result<LyapunovProbe, StabilityError> {
    let g = match flow_generator(sys) {
        Ok(g) => g,
        Err(StabilityError::UnstableFlow(_)) | Err(StabilityError::Linalg(LinalgError::BranchCutViolation(_))) => {
            return Ok(LyapunovProbe {
                verdict: LyapunovVerdict::NotHurwitz,
                p: None,
                jump_max_eig: None,
            })
        }
        Err(e) => return Err(e),
    };
    lyapunov_check_generator(&g, sys.reset_matrix())
}

/// Lyapunov probe for an explicit generator and reset matrix.
pub fn lyapunov_check_generator(
    generator: &DMatrix<f64>,
    reset: &DMatrix<f64>,
) -> Result<LyapunovProbe, StabilityError> {
    let n = generator.nrows();
    if reset.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch(format!("A_R is {:?}, expected {n}x{n}", reset.shape())).into());
    }
    if check_hurwitz(generator).is_err() {
        return Ok(LyapunovProbe {
            verdict: LyapunovVerdict::NotHurwitz,
            p: None,
            jump_max_eig: None,
        });
    }
    let p = lyapunov_solve(generator, &DMatrix::identity(n, n))?;
    let jump = reset.transpose() * &p * reset - &p;
    let jump = (&jump + jump.transpose()) * 0.5;
    let jump_max = SymmetricEigen::new(jump).eigenvalues.max();
    let verdict = if is_positive_definite(&p) && jump_max <= JUMP_TOL {
        LyapunovVerdict::Certified
    } else {
        LyapunovVerdict::Inconclusive
    };
    Ok(LyapunovProbe {
        verdict,
        p: Some(p),
        jump_max_eig: Some(jump_max),
    })
}

/// Settings of a full stability analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    pub p_r: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub grid: FrequencyGrid,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            p_r: 1.0,
            beta_min: -2.0,
            beta_max: 2.0,
            grid: FrequencyGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub verdict: LyapunovVerdict,
    pub p: Option<Vec<Vec<f64>>>,
    pub jump_max_eig: Option<f64>,
}

/// Everything the stability analysis produces, ready for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub order: f64,
    pub p_r: f64,
    pub flow_generator: Vec<Vec<f64>>,
    pub h_beta: HBeta,
    pub beta_interval: Option<[f64; 2]>,
    pub beta_runs: Vec<[f64; 2]>,
    pub per_beta: Vec<BetaSample>,
    pub certificate: Certificate,
    pub lyapunov: LyapunovSummary,
    pub warnings: Vec<String>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the β scan and the Lyapunov probe and cross-checks them.
///
/// A loop whose flow generator is not Hurwitz still gets a report (with the
/// unscanned `H_β` and a warning) but is never certified.
pub fn stability_report(sys: &ClosedLoopResetSystem, opts: &StabilityOptions) -> Result<StabilityReport, StabilityError> {
    let g = transformed(sys)?;
    let h = h_beta_from_generator(&g, sys.c(), sys.reset_states(), opts.p_r)?;
    let mut warnings = Vec::new();
    let (runs, widest, per_beta) = match check_hurwitz(&g) {
        Ok(()) => {
            let interval = beta_interval(&h, opts.beta_min, opts.beta_max, &opts.grid)?;
            for s in &interval.scanned {
                if s.spr != s.re_positive {
                    warnings.push(format!(
                        "beta = {:.3}: phase test says {}, real-part test says {}",
                        s.beta, s.spr, s.re_positive
                    ));
                }
            }
            (interval.runs.clone(), interval.widest(), interval.scanned)
        }
        Err(StabilityError::UnstableFlow(v)) => {
            warnings.push(format!("flow generator has eigenvalue {v}; no beta scan performed"));
            (Vec::new(), None, Vec::new())
        }
        Err(e) => return Err(e),
    };
    let probe = lyapunov_check_generator(&g, sys.reset_matrix())?;
    if probe.certified() && runs.is_empty() {
        warnings.push("Lyapunov probe certifies the loop but no beta passed the frequency test".into());
    }
    let certificate = if runs.is_empty() {
        Certificate::NotCertified
    } else {
        Certificate::Certified
    };
    Ok(StabilityReport {
        order: sys.order(),
        p_r: opts.p_r,
        flow_generator: rows(&g),
        h_beta: h,
        beta_interval: widest,
        beta_runs: runs,
        per_beta,
        certificate,
        lyapunov: LyapunovSummary {
            verdict: probe.verdict,
            p: probe.p.as_ref().map(rows),
            jump_max_eig: probe.jump_max_eig,
        },
        warnings,
    })
}

/// `omega,re,im,mag_db,phase_deg` for `h` on the grid.
pub fn phase_csv(h: &RationalFunction, grid: &FrequencyGrid) -> Result<String, StabilityError> {
    let mut out = String::from("omega,re,im,mag_db,phase_deg\n");
    for &w in grid.omegas() {
        let v = h.eval(Complex64::new(0.0, w))?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            w,
            v.re,
            v.im,
            20.0 * v.norm().log10(),
            v.arg().to_degrees()
        ));
    }
    Ok(out)
}
