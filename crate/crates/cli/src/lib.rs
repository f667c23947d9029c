//! Config-driven scenario runner for the V-system coherence library.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod preset;
pub mod run;

pub use config::{ConfigError, ScenarioConfig};
pub use preset::{preset_pc645, PresetMode};
pub use run::{run_scenario, sweep, write_artifacts, RunOutput};

/// Environment variable overriding `ensemble.workers`.
pub const WORKERS_ENV: &str = "VCOH_WORKERS";

/// Applies `VCOH_WORKERS`, the only setting environment variables may
/// override.
pub fn apply_env_overrides(cfg: &mut ScenarioConfig) -> Result<(), ConfigError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        cfg.ensemble.workers = v.trim().parse().map_err(|_| ConfigError::Field {
            field: "ensemble.workers",
            reason: format!("{WORKERS_ENV}={v} is not a non-negative integer"),
        })?;
    }
    Ok(())
}
