//! Experiment configuration, runners, error metrics and result emission.

pub mod config;
pub mod data;
pub mod experiments;
pub mod metrics;
pub mod output;
pub mod record;

use thiserror::Error;

pub use config::{ConfigError, Experiment, ExperimentConfig, LambdaSpec, OutputFormat, RankSpec, Sampler};
pub use experiments::{run_exp1, run_exp2, run_exp3, run_experiment};
pub use metrics::{l2_error_quadrature, loglog_slope, MetricError};
pub use output::{emit_results, record_from_json, record_to_json};
pub use record::ResultRecord;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
    #[error(transparent)]
    Ovkr(#[from] crate::ovkr::OvkrError),
    #[error(transparent)]
    Koopman(#[from] crate::koopman::KoopmanError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-finite metric {0}")]
    NonFinite(String),
    #[error("data file line {line}: {message}")]
    DataFormat { line: usize, message: String },
}
