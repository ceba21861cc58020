//! Scenario configuration, presets and run orchestration on top of `tdhf-core`.

pub mod config;
pub mod describe;
pub mod error;
pub mod presets;
pub mod runner;

pub use config::{RunConfig, Scenario};
pub use describe::{describe, Report};
pub use error::ScenarioError;
pub use presets::{preset, Size, PRESETS};
pub use runner::{load_spectrum, load_state, run_scenario, RunMetadata};
