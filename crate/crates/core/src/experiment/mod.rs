//! Config-driven runs: data → MoE and dropout training → conformal
//! calibration → evaluation, as separately runnable stages that exchange
//! files inside one output directory.

mod config;
mod manifest;
mod pipeline;
mod seeds;
mod stages;

pub use config::{
    CalibrationSpec, DataSource, ExperimentConfig, Method, MetricSpec, SplitSpec, CONFIG_VERSION,
};
pub use manifest::{Manifest, Stage, StageRecord, StageStatus, MANIFEST_FILE};
pub use pipeline::{fit_dropout, fit_moe, method_intervals, MoeOutputs};
pub use seeds::{report_seeds, MetricSummary, RunRef, SeedReport};
pub use stages::{
    artifact, calibrate_stage, evaluate_stage, gen_data_stage, load_run_data, run_experiment, train_stage,
    CalibrationFile, EvaluateOptions, RunSummary,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conformal::CalibrationError;
use crate::data::DataError;
use crate::mcdropout::DropoutError;
use crate::metrics::MetricsError;
use crate::moe::MoeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{stage} needs {} (run the upstream stage first)", path.display())]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("data: {0}")]
    Data(#[from] DataError),

    #[error("model: {0}")]
    Moe(#[from] MoeError),

    #[error("dropout baseline: {0}")]
    Dropout(#[from] DropoutError),

    #[error("calibration: {0}")]
    Calibration(#[from] CalibrationError),

    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),

    #[error("{0}")]
    Other(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
