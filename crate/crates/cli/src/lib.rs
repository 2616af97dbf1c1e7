//! Scenario runner and reproduction harness for fractional-order reset
//! control loops.

pub mod error;
pub mod reproduce;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use scenario::{Analysis, Scenario};
