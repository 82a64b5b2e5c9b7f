//! Scenario harness: setup files, models, demons, audits, results.

pub mod audit;
pub mod demon;
pub mod model;
pub mod result;
pub mod scenarios;
pub mod setup;

pub use audit::{audit, parse_bound_kind, parse_observable_arg, threshold_report, xi_report, BoundKind};
pub use demon::{detection_threshold, Demon};
pub use model::{build_model, Model};
pub use result::{ScenarioResult, Verdict};
pub use scenarios::{default_setup, default_setup_text, run, SCENARIOS};
pub use setup::{parse_setup_file, parse_setup_str, setup_hash, SetupSpec, SCHEMA_VERSION};

/// Knobs shared by every entry point.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 7, tol: 1e-9 }
    }
}
