use std::path::PathBuf;

use fracreset_core::describing::DfError;
use fracreset_core::fode::FodeError;
use fracreset_core::models::ModelError;
use fracreset_core::numcore::LinalgError;
use fracreset_core::simreset::SimError;
use fracreset_core::stability::StabilityError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed scenario or arguments (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// A numerical routine failed (exit code 3).
    #[error("{module}: {message}")]
    Numerical { module: &'static str, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } | CliError::Io { .. } => 3,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical { module, .. } => module,
            CliError::Io { .. } => "io",
        };
        json!({
            "error": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

macro_rules! numerical_from {
    ($($ty:ty => $module:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Numerical { module: $module, message: e.to_string() }
            }
        })*
    };
}

numerical_from!(
    LinalgError => "numcore",
    FodeError => "fode",
    ModelError => "model",
    SimError => "simulation",
    DfError => "describing",
    StabilityError => "stability",
);
