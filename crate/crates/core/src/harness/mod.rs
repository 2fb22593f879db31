//! Configuration, study drivers and file formats behind the command line.

pub mod config;
pub mod io;
pub mod study;

pub use config::{load_config, ExperimentConfig, ExperimentKind, TruthSpec};
pub use study::{run_assouad_study, run_kl_sweep, run_posterior_study, run_rate_study, write_study, StudyResult};
