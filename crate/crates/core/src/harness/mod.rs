//! Experiment orchestration: configuration, the built-in test fields, the
//! extension-ratio experiment, the log-layer counterexample and the
//! acceptance runner.

mod checks;
mod config;
mod experiment;
mod family;
mod log_layer;

use thiserror::Error;

use crate::covering::CoveringError;
use crate::extension::ExtensionError;
use crate::field::FieldError;
use crate::geometry::GeometryError;

pub use checks::{check_names, run_check, verify_all, CheckOutcome, VerifyConfig, VerifyReport};
pub use config::{DomainConfig, EstimatorSpec, ExperimentConfig, GridSpec};
pub use experiment::{fit_slope, run_extension_experiment, ExperimentReport, ProductRow, RatioRow, SlopeFit};
pub use family::{RandomField, TestField, FAMILY_VERSION, PRODUCT_MULTIPLIERS};
pub use log_layer::{example_log_layer, layer_unit_integral, LogLayerReport, ResolutionMax};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}
