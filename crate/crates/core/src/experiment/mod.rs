//! Config files, run directories, metric streams and the CLI commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod metrics;

pub use commands::{
    cmd_ablate_a, cmd_eval, cmd_export_curves, cmd_random_schedule, cmd_search, cmd_train_fixed, prepare_data,
    AblationRow, PreparedData, RunSummary,
};
pub use config::{ExperimentConfig, Overrides};
pub use metrics::{read_metrics, MetricRecord};
