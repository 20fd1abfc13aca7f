//! Reproducible experiment harness: decay fits, JSON experiment configs,
//! reports with pass/fail verdicts, and deterministic output files.

pub mod config;
pub mod fit;
pub mod report;
pub mod runner;

pub use config::{
    ClassCheckParams, CoverCheckParams, DecouplingParams, Experiment, ExperimentConfig,
    FiniteTypeWitnessParams, FocusingWitnessParams, KernelCheckParams, L2DecayParams,
    RandomPhaseWitnessParams, RecursionCheckParams, ScheduleParams, SymbolChoice, WitnessParams,
    SCHEMA_VERSION,
};
pub use fit::{fit_decay, FitResult};
pub use report::{CheckLine, Environment, ExperimentReport, Prediction};
pub use runner::{run_experiment, ExperimentOutput, RunArtifacts, RunOptions, THREADS_ENV};
