//! Config-driven experiments: training runs under shared seeds, evaluation,
//! ablation grids, checkpoints and result files.

mod checkpoint;
mod config;
mod grid;
pub mod output;
pub mod presets;
mod run;

pub use checkpoint::Checkpoint;
pub use config::{
    derive_seed, DatasetConfig, DiagnosticsConfig, EvaluationConfig, ExperimentConfig, ModelConfig, OptimizerConfig,
    RunSeeds, ScheduleKind, SplitConfig, TrainingConfig, SCHEMA_VERSION,
};
pub use grid::{ablation_grid, GridRow};
pub use run::{
    accuracy_gain_report, binary_metrics, landscape, params_digest, run_experiment, run_seed, sharpness_reports, train,
    train_observed, BatchView, EpochLosses, Prepared, RunResult, SeedRun,
};
