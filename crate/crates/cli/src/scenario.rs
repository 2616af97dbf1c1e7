//! Declarative scenario files (TOML, strict keys).

use fracreset_core::fode::MemoryMode;
use fracreset_core::models::{close_loop, reciprocal_integer, series_tf, ClosedLoopResetSystem, ElementKind, ResetElement, StateSpaceModel};
use fracreset_core::simreset::{Reference, SimulationConfig, DEFAULT_DETECTION_TOL, DEFAULT_STEP};
use fracreset_core::stability::{FrequencyGrid, StabilityOptions};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Simulate,
    Metrics,
    Df,
    Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub analyses: Vec<Analysis>,
    pub plant: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<SystemSpec>,
    pub reset_element: ElementSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub df: DfSpec,
}

/// A SISO system as a transfer function or an integer-order state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    /// Coefficients in descending powers of `s`.
    Tf { num: Vec<f64>, den: Vec<f64> },
    /// Row-major matrices.
    Ss {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ElementName {
    Ci,
    Fore,
    Fci,
    Fi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub kind: ElementName,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    /// `false` keeps the element linear (reset matrix `I`).
    #[serde(default = "yes")]
    pub resets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "unit_step")]
    pub reference: Reference,
    #[serde(default)]
    pub memory_mode: MemoryMode,
    #[serde(default = "default_tol")]
    pub detection_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_length: Option<usize>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            horizon: default_horizon(),
            reference: unit_step(),
            memory_mode: MemoryMode::default(),
            detection_tol: DEFAULT_DETECTION_TOL,
            memory_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    #[serde(default = "one")]
    pub p_r: f64,
    #[serde(default = "default_beta_range")]
    pub beta_range: [f64; 2],
    /// β at which the phase curve is exported; defaults to the middle of the
    /// widest passing interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_beta: Option<f64>,
    #[serde(default = "default_omega_grid")]
    pub omega_range: [f64; 2],
    #[serde(default = "default_omega_points")]
    pub omega_points: usize,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            p_r: 1.0,
            beta_range: default_beta_range(),
            phase_beta: None,
            omega_range: default_omega_grid(),
            omega_points: default_omega_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfSpec {
    #[serde(default = "default_df_range")]
    pub omega_range: [f64; 2],
    #[serde(default = "default_df_points")]
    pub points: usize,
    /// Frequencies at which the simulation-based estimate is also computed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub numerical: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for DfSpec {
    fn default() -> Self {
        Self {
            omega_range: default_df_range(),
            points: default_df_points(),
            numerical: Vec::new(),
            amplitude: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_horizon() -> f64 {
    30.0
}
fn unit_step() -> Reference {
    Reference::Constant { value: 1.0 }
}
fn default_tol() -> f64 {
    DEFAULT_DETECTION_TOL
}
fn default_beta_range() -> [f64; 2] {
    [-2.0, 2.0]
}
fn default_omega_grid() -> [f64; 2] {
    [1e-4, 1e4]
}
fn default_omega_points() -> usize {
    2000
}
fn default_df_range() -> [f64; 2] {
    [1e-2, 1e2]
}
fn default_df_points() -> usize {
    200
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        /// Scenario files shipped with the binary, by name.
        pub const BUNDLED: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".scenario")))),*
        ];
    };
}

bundled!(
    "example1_linear",
    "example1_fore",
    "example1_ci",
    "example1_fci",
    "example1_fi",
    "example2",
    "example3_fore",
    "example3_ci",
    "example3_fci",
);

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_finite(what: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite values")))
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }

    /// Checks everything that can be checked without numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid(format!("name {:?} is not a valid file stem", self.name)));
        }
        if self.analyses.is_empty() {
            return Err(invalid("analyses must not be empty"));
        }
        self.plant.validate("plant")?;
        if let Some(c) = &self.controller {
            c.validate("controller")?;
        }
        self.reset_element.kind()?;
        let s = &self.simulation;
        if !(s.step > 0.0 && s.horizon > s.step && s.horizon.is_finite()) {
            return Err(invalid("simulation needs 0 < step < horizon"));
        }
        if !(s.detection_tol >= 0.0) {
            return Err(invalid("detection_tol must be non-negative"));
        }
        let st = &self.stability;
        if !(st.p_r > 0.0) {
            return Err(invalid("p_r must be positive"));
        }
        if !(st.beta_range[0] <= st.beta_range[1]) {
            return Err(invalid("beta_range must be ordered"));
        }
        check_range("stability.omega_range", st.omega_range)?;
        if st.omega_points < 2 {
            return Err(invalid("omega_points must be at least 2"));
        }
        check_range("df.omega_range", self.df.omega_range)?;
        if self.df.points < 2 || !(self.df.amplitude > 0.0) {
            return Err(invalid("df needs points >= 2 and a positive amplitude"));
        }
        if self.df.numerical.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("df.numerical frequencies must be positive"));
        }
        Ok(())
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        let s = &self.simulation;
        SimulationConfig {
            step: s.step,
            horizon: s.horizon,
            reference: s.reference,
            memory_mode: s.memory_mode,
            detection_tol: s.detection_tol,
            memory_length: s.memory_length,
        }
    }

    pub fn stability_options(&self) -> Result<StabilityOptions, CliError> {
        let st = &self.stability;
        let grid = FrequencyGrid::log(st.omega_range[0], st.omega_range[1], st.omega_points)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(StabilityOptions {
            p_r: st.p_r,
            beta_min: st.beta_range[0],
            beta_max: st.beta_range[1],
            grid,
        })
    }

    pub fn element(&self) -> Result<ResetElement, CliError> {
        self.reset_element.build()
    }

    /// Closed loop of plant, controller and reset element.
    ///
    /// A controller that is not strictly proper (such as `s + 1`) cannot be
    /// realized on its own; it is multiplied into the plant instead.
    pub fn closed_loop(&self) -> Result<ClosedLoopResetSystem, CliError> {
        let element = self.element()?;
        let (plant, linear) = match (&self.plant, &self.controller) {
            (SystemSpec::Tf { num, den }, Some(SystemSpec::Tf { num: cn, den: cd })) if !strictly_proper(cn, cd) => {
                let (n, d) = series_tf((cn, cd), (num, den));
                (tf_model(&n, &d)?, None)
            }
            (p, c) => (p.model()?, c.as_ref().map(SystemSpec::model).transpose()?),
        };
        let mut sys = close_loop(&plant, linear.as_ref(), &element).map_err(CliError::from)?;
        if !self.reset_element.resets {
            sys = sys.without_reset();
        }
        Ok(sys)
    }
}

fn check_range(what: &str, r: [f64; 2]) -> Result<(), CliError> {
    if r[0] > 0.0 && r[1] > r[0] && r[1].is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must satisfy 0 < lo < hi")))
    }
}

fn degree(p: &[f64]) -> Option<usize> {
    p.iter().position(|&c| c != 0.0).map(|i| p.len() - 1 - i)
}

fn strictly_proper(num: &[f64], den: &[f64]) -> bool {
    match (degree(num), degree(den)) {
        (None, _) => true,
        (Some(n), Some(d)) => n < d,
        (Some(_), None) => false,
    }
}

fn tf_model(num: &[f64], den: &[f64]) -> Result<StateSpaceModel, CliError> {
    StateSpaceModel::from_transfer_function(num, den, 1.0).map_err(|e| invalid(e.to_string()))
}

impl SystemSpec {
    fn validate(&self, what: &str) -> Result<(), CliError> {
        match self {
            SystemSpec::Tf { num, den } => {
                check_finite(what, num)?;
                check_finite(what, den)?;
                if degree(den).is_none() {
                    return Err(invalid(format!("{what} denominator is zero")));
                }
                if degree(num).is_none() {
                    return Err(invalid(format!("{what} numerator is zero")));
                }
            }
            SystemSpec::Ss { a, b, c } => {
                let n = a.len();
                let square = a.iter().all(|r| r.len() == n);
                let col = b.len() == n && b.iter().all(|r| r.len() == 1);
                let row = c.len() == 1 && c[0].len() == n;
                if n == 0 || !square || !col || !row {
                    return Err(invalid(format!("{what} state space must be n x n, n x 1, 1 x n with n > 0")));
                }
                for m in [a, b, c] {
                    for r in m {
                        check_finite(what, r)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Integer-order realization; transfer functions must be strictly proper.
    pub fn model(&self) -> Result<StateSpaceModel, CliError> {
        match self {
            SystemSpec::Tf { num, den } => tf_model(num, den),
            SystemSpec::Ss { a, b, c } => {
                let mat = |rows: &Vec<Vec<f64>>| {
                    let r = rows.len();
                    let k = rows.first().map_or(0, Vec::len);
                    DMatrix::from_row_iterator(r, k, rows.iter().flatten().copied())
                };
                StateSpaceModel::new(mat(a), mat(b), mat(c), 1.0).map_err(|e| invalid(e.to_string()))
            }
        }
    }
}

impl ElementSpec {
    pub fn kind(&self) -> Result<ElementKind, CliError> {
        if !(self.gain.is_finite() && self.gain != 0.0) {
            return Err(invalid("reset_element.gain must be finite and nonzero"));
        }
        let need_order = |order: Option<f64>| -> Result<f64, CliError> {
            let a = order.ok_or_else(|| invalid("reset_element.order is required for fci and fi"))?;
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid(format!("reset_element.order {a} is outside (0, 1]")));
            }
            reciprocal_integer(a).map_err(|e| invalid(e.to_string()))?;
            Ok(a)
        };
        let no = |field: &str, v: Option<f64>| -> Result<(), CliError> {
            match v {
                Some(_) => Err(invalid(format!("reset_element.{field} does not apply to {:?}", self.kind))),
                None => Ok(()),
            }
        };
        match self.kind {
            ElementName::Ci => {
                no("order", self.order)?;
                no("pole", self.pole)?;
                Ok(ElementKind::Ci)
            }
            ElementName::Fore => {
                no("order", self.order)?;
                let pole = self.pole.ok_or_else(|| invalid("reset_element.pole is required for fore"))?;
                if !(pole >= 0.0 && pole.is_finite()) {
                    return Err(invalid(format!("reset_element.pole {pole} must be non-negative")));
                }
                Ok(ElementKind::Fore { gain: self.gain, pole })
            }
            ElementName::Fci => {
                no("pole", self.pole)?;
                Ok(ElementKind::Fci {
                    order: need_order(self.order)?,
                })
            }
            ElementName::Fi => {
                no("pole", self.pole)?;
                Ok(ElementKind::Fi {
                    order: need_order(self.order)?,
                })
            }
        }
    }

    pub fn build(&self) -> Result<ResetElement, CliError> {
        let kind = self.kind()?;
        let el = ResetElement::new(kind).map_err(|e| invalid(e.to_string()))?;
        Ok(match kind {
            ElementKind::Fore { .. } => el,
            _ => el.scaled(self.gain),
        })
    }
}
