//! Metrics, error reports and the experiment driver behind the CLI.

mod config;
mod experiment;
mod metrics;

pub use config::{apply_override, config_hash, ExperimentConfig};
pub use experiment::{comparison_table, cdf_csv, evaluate_bundle, run_experiment, train_and_evaluate, ExperimentResult, SystemSummary};
pub use metrics::{
    error_cdf, localization_error, localization_errors, median, percentile, CdfPoint, ErrorReport, PointReport, RunMetadata,
    REPORTED_PERCENTILES,
};
