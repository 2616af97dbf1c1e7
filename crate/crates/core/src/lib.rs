//! Fractional-order reset control systems.
//!
//! Grünwald–Letnikov simulation of loops closed around Clegg integrators,
//! first-order reset elements and fractional Clegg integrators, their
//! describing functions, and frequency-domain stability certificates.

pub mod describing;
pub mod fode;
pub mod models;
pub mod numcore;
pub mod simreset;
pub mod stability;

pub use describing::{describing_function, numerical_df, phase_lead, DescribingFunctionPoint, DfError, LeadElement};
pub use fode::{gl_step, gl_weights, FodeError, GlState, GlWeights, MemoryMode};
pub use models::{
    assemble_closed_loop, augment_integer_order, ClosedLoopResetSystem, ElementKind, ModelError, ResetElement,
    ResetRule, StateSpaceModel,
};
pub use numcore::{LinalgError, RationalFunction};
pub use simreset::{simulate, step_metrics, Reference, SimError, SimulationConfig, StepMetrics, Trajectory};
pub use stability::{
    beta_interval, h_beta, lyapunov_check, spr_check, stability_report, Certificate, FrequencyGrid, HBeta,
    LyapunovVerdict, StabilityError, StabilityOptions, StabilityReport,
};
