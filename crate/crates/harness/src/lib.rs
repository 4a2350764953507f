//! Experiment harness for the fracdual solver: configs, runs, sweeps,
//! reports and the acceptance suite.

pub mod config;
pub mod experiments;
pub mod record;
pub mod report;
pub mod suite;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentId};
pub use record::{RunRecord, Status, Verdict};
