//! Experiment harness: config parsing, suite orchestration and CSV output.

pub mod config;
pub mod series;
pub mod suite;

pub use config::{load_config, parse_config, parse_config_with, CliOverrides, ConfigError, ProblemKind, RunConfig};
pub use series::{emit_figure_series, label_from_path, SeriesError};
pub use suite::{run_suite, run_suite_with, variant_label, RunResult, SuiteError, SuiteReport};
