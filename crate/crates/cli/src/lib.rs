//! Scenario runner for the fractal Burgers laboratory: scenario files,
//! solve/verify pipelines, CSV/JSON artifacts and SVG plots.

pub mod checks;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use checks::{CheckKind, CheckSpec};
pub use config::{load_scenario, parse_scenario, preset, Scenario, PRESETS};
pub use error::{CliError, CliResult, EXIT_ABORT, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK};
pub use run::{render_dir, run_solve, run_verify, RunOptions, RunReport};
