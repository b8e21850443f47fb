//! Scenario documents, built-in presets and the runner that turns them into
//! CSV tables and a run manifest.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{Action, Scenario};
pub use runner::{exit_code_for, run_config_file, run_scenario, RunOverrides, RunStatus, RunSummary};
