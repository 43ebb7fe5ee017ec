//! Experiment driver, detection scoring, reduction accounting and PPI output.

pub mod experiment;
pub mod matching;
pub mod ppi;
pub mod reduction;

pub use experiment::{
    run_experiment, run_experiment_with, run_trial, ExperimentConfig, MetricsRecord, Profile,
    SceneSpec, Setup, StageCounts,
};
pub use matching::{match_targets, DetectionReport};
pub use ppi::emit_ppi;
pub use reduction::{sampling_reduction, ReductionSummary};
