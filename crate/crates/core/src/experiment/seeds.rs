use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use super::{ExperimentError, Method};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    #[serde(with = "crate::serde_f64")]
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    #[serde(with = "crate::serde_f64")]
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else if !mean.is_finite() {
            f64::NAN
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRef {
    pub dir: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Per-method, per-metric mean ± std across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub runs: Vec<RunRef>,
    pub methods: BTreeMap<String, BTreeMap<String, MetricSummary>>,
}

impl SeedReport {
    pub fn get(&self, method: Method, metric: &str) -> Option<&MetricSummary> {
        self.methods.get(method.as_str())?.get(metric)
    }

    /// Markdown table, one row per method and metric.
    pub fn to_markdown(&self) -> String {
        let seeds: Vec<String> = self.runs.iter().map(|r| r.seed.to_string()).collect();
        let mut s = format!("Seeds: {}\n\n| method | metric | mean ± std | n |\n|---|---|---|---|\n", seeds.join(", "));
        for (method, metrics) in &self.methods {
            for (metric, m) in metrics {
                s.push_str(&format!("| {method} | {metric} | {:.4} ± {:.4} | {} |\n", m.mean, m.std, m.n));
            }
        }
        s
    }
}

fn read_reports(dir: &Path) -> Result<Vec<MetricsReport>, ExperimentError> {
    let entries = fs::read_dir(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("metrics_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ExperimentError::MissingArtifact {
            stage: "report",
            path: dir.join("metrics_<method>.json"),
        });
    }
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| ExperimentError::io(p, e))?;
            serde_json::from_slice(&bytes).map_err(|source| ExperimentError::Json {
                path: p.clone(),
                source,
            })
        })
        .collect()
}

/// Merges evaluated runs into mean ± std tables. When `out` is given writes
/// `seed_report.json`, `seed_report.csv` (`method,metric,mean,std,n`), and
/// `seed_report.md` there.
pub fn report_seeds(run_dirs: &[PathBuf], out: Option<&Path>) -> Result<SeedReport, ExperimentError> {
    if run_dirs.is_empty() {
        return Err(ExperimentError::Other("report needs at least one run directory".into()));
    }
    let mut runs = Vec::new();
    let mut values: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for dir in run_dirs {
        let manifest = Manifest::load(dir)?;
        runs.push(RunRef {
            dir: dir.display().to_string(),
            seed: manifest.seed,
            config_hash: manifest.config_hash,
        });
        for report in read_reports(dir)? {
            let slot = values.entry(report.method.clone()).or_default();
            for (metric, v) in report.scalars() {
                slot.entry(metric).or_default().push(v);
            }
        }
    }
    let methods = values
        .into_iter()
        .map(|(method, metrics)| {
            let summary = metrics
                .into_iter()
                .map(|(k, v)| (k, MetricSummary::from_values(&v)))
                .collect();
            (method, summary)
        })
        .collect();
    let report = SeedReport { runs, methods };
    if let Some(out) = out {
        write_report(&report, out)?;
    }
    Ok(report)
}

fn write_report(report: &SeedReport, out: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    let json_path = out.join("seed_report.json");
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| ExperimentError::io(&json_path, e))?;

    let csv_path = out.join("seed_report.csv");
    let csv_err = |e: csv::Error| ExperimentError::Other(format!("{}: {e}", csv_path.display()));
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    w.write_record(["method", "metric", "mean", "std", "n"]).map_err(csv_err)?;
    for (method, metrics) in &report.methods {
        for (metric, m) in metrics {
            w.write_record([method.clone(), metric.clone(), m.mean.to_string(), m.std.to_string(), m.n.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(&csv_path, e))?;

    let md_path = out.join("seed_report.md");
    fs::write(&md_path, report.to_markdown()).map_err(|e| ExperimentError::io(&md_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = MetricSummary::from_values(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std, s.n), (2.0, 1.0, 3));
        assert_eq!(MetricSummary::from_values(&[4.0]).std, 0.0);
        assert_eq!(MetricSummary::from_values(&[1.0, f64::INFINITY]).mean, f64::INFINITY);
    }
}
