//! Interval and uncertainty evaluation.
//!
//! * validity: [`picp`], [`groupwise_picp`]
//! * efficiency: [`mpiw_nmpiw`], [`cwc`]
//! * adaptivity: [`sparsification`] (AUSE), [`ssc`]
//! * point accuracy and fit: [`point_metrics`], [`report_nll`]
//! * disentanglement diagnostics: [`disentangle_stats`]

mod interval;
mod point;
mod report;
mod sparsification;
mod stats;

pub use interval::{cwc, groupwise_picp, mpiw_nmpiw, picp, ssc, CwcConfig, GroupCoverage, GroupCoverageTable, SscBin};
pub use point::{average_ranks, mae, pearson, point_metrics, report_nll, rmse, spearman, PointMetrics};
pub use report::{
    evaluate_method, write_group_csv, write_sparsification_csv, write_ssc_csv, EvalConfig, MethodEvaluation,
    MetricsReport,
};
pub use sparsification::{default_grid, sparsification, SparsificationCurve};
pub use stats::{disentangle_stats, kendall_tau_b, mann_whitney_u, welch_t_test, DisentangleStats, TestResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,

    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),

    #[error("degenerate label range: y_max == y_min == {0}")]
    DegenerateRange(f64),

    #[error("zero variance: correlation undefined")]
    ZeroVariance,

    #[error("constant-width intervals making SSC uninformative")]
    ConstantWidth,

    #[error("infinite intervals: {0}")]
    InfiniteIntervals(&'static str),

    #[error("invalid bin count {bins} for {n} samples")]
    InvalidBins { bins: usize, n: usize },

    #[error("invalid sparsification grid: {0}")]
    InvalidGrid(String),

    #[error("need at least {need} samples, got {got}")]
    TooFew { need: usize, got: usize },

    #[error("csv output: {0}")]
    Csv(String),
}

impl From<csv::Error> for MetricsError {
    fn from(e: csv::Error) -> Self {
        MetricsError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Csv(e.to_string())
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::Length(a, b));
    }
    if a == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}
