//! Experiment configs, runners and result tables.

pub mod config;
pub mod experiments;
pub mod report;
pub mod world;

pub use config::{EstimatorChoice, ExperimentConfig, ExperimentKind, WorldConfig, SCHEMA_VERSION};
pub use experiments::{run_as, run_experiment, run_training};
pub use report::{emit_report, Format, Row, RunReport};
pub use world::World;
