//! Batch front-end for convergence studies: parse a run configuration, run
//! the refinement ladder, write the table, report and plot data.

pub mod config;
pub mod run;
pub mod selfcheck;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run_scenario, RunOutcome};
