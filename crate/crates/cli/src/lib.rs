//! Configuration and orchestration for election experiments.

pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, Family, GraphSpec, NEstimate, ProtocolSpec, Retention};
pub use experiment::{run_experiment, trial_seed, verdict_table, ExperimentOutcome};
