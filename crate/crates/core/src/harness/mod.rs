//! Experiment orchestration behind the command-line tool.

pub mod config;
pub mod experiment;
pub mod results;

pub use config::{Environment, ExperimentConfig, SchemeSpec, DRLD_LABEL};
pub use experiment::{collect_rows, encoder_for, run_training, scenario_for_seed, training_log_csv, Cell, CellOutcome, Evaluation};
