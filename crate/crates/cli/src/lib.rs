//! Experiment runner for neural channel-capacity estimation.
//!
//! A run reads a TOML sweep description (see [`config`]), estimates the
//! capacity of every (SNR, estimator) cell with [`ncap_core`], and writes
//! `results.csv`, `summary.json`, per-cell training traces and learned-input
//! histograms.

pub mod config;
pub mod run;

pub use config::{validate_config, ConfigError, ConfigIssue, EstimatorEntry, ExperimentConfig, OutputConfig};
pub use run::{
    cell_name, exit, reference_report, references, run_experiment, CellResult, CellStatus, References, Summary,
    BA_INPUTS, BA_MAX_ITER, BA_OUTPUTS, BA_TOL, RESULTS_HEADER,
};
