//! Scenario configuration, runs, calibration and result files.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{parse_config, ScenarioConfig};
pub use output::emit_results;
pub use scenario::{calibrate_beta, detect_final_eigenstate, run_batch, run_scenario, CalibrationReport, RunResult};
