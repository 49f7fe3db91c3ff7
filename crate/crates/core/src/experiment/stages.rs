use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, Stage};
use super::pipeline::{fit_dropout, fit_moe, method_intervals, MoeOutputs};
use super::{DataSource, ExperimentConfig, ExperimentError, Method};
use crate::conformal::{calibrate, CalibrationResult, PredictionInterval, ScaleKind};
use crate::data::{load_csv, save_csv, split_dataset, write_meta, Dataset, DatasetMeta, GeneratorSpec, Split};
use crate::mcdropout::{mc_intervals, mc_predict_batch, DropoutMlp};
use crate::metrics::{
    disentangle_stats, evaluate_method, report_nll, write_group_csv, write_sparsification_csv, write_ssc_csv,
    DisentangleStats, GroupCoverageTable, MethodEvaluation, MetricsReport,
};
use crate::moe::{load_checkpoint, save_checkpoint, MoeModel, TrainHistory};
use crate::numerics::Rng;

/// File names inside a run directory.
pub mod artifact {
    pub const CONFIG: &str = "config.json";
    pub const DATA: &str = "data.csv";
    pub const DATA_META: &str = "data.meta.json";
    pub const MODEL: &str = "model.json";
    pub const TRAIN_HISTORY: &str = "train_history.json";
    pub const DROPOUT_MODEL: &str = "dropout_model.json";
    pub const DROPOUT_HISTORY: &str = "dropout_history.json";
    pub const CALIBRATION: &str = "calibration.json";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const DISENTANGLE: &str = "disentangle.json";
    pub const CURVES: &str = "curves";
    pub const GROUP_COVERAGE: &str = "curves/group_coverage.csv";

    pub fn metrics(method: super::Method) -> String {
        format!("metrics_{method}.json")
    }

    pub fn sparsification(method: super::Method) -> String {
        format!("curves/{method}_sparsification.csv")
    }

    pub fn ssc(method: super::Method, bins: usize) -> String {
        format!("curves/{method}_ssc_J{bins}.csv")
    }
}

/// Conformal quantiles for every configured scale kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub alpha: f64,
    pub epsilon: f64,
    pub results: Vec<CalibrationResult>,
}

impl CalibrationFile {
    pub fn get(&self, kind: ScaleKind) -> Option<&CalibrationResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    /// Overrides the configured miscoverage level and recalibrates.
    pub alpha: Option<f64>,
    /// Restricts evaluation to these methods.
    pub methods: Option<Vec<Method>>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub evaluations: BTreeMap<Method, MethodEvaluation>,
    pub disentangle: Option<DisentangleStats>,
}

impl RunSummary {
    pub fn report(&self, method: Method) -> Option<&MetricsReport> {
        self.evaluations.get(&method).map(|e| &e.report)
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|source| ExperimentError::Json {
            path: self.path(name),
            source,
        })?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| ExperimentError::io(&path, e))?;
        self.note(name);
        Ok(())
    }

    fn note(&mut self, name: &str) {
        self.written.push(name.to_string());
    }
}

/// Runs `body` and records its outcome in the manifest, success or not.
fn staged<T>(
    config: &ExperimentConfig,
    stage: Stage,
    fresh: bool,
    body: impl FnOnce(&mut Outputs<'_>) -> Result<T, ExperimentError>,
) -> Result<T, ExperimentError> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir.join(artifact::CURVES)).map_err(|e| ExperimentError::io(dir, e))?;
    let mut manifest = if fresh { Manifest::new(config) } else { Manifest::load_or_new(dir, config) };
    let mut out = Outputs { dir, written: Vec::new() };
    let result = body(&mut out);
    let error = result.as_ref().err().map(ToString::to_string);
    if let Some(e) = &error {
        log::error!("stage {} failed: {e}", stage.as_str());
    }
    manifest.record(stage, config, out.written, error);
    manifest.save(dir)?;
    result
}

fn require(stage: &'static str, dir: &Path, name: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(ExperimentError::MissingArtifact { stage, path })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let bytes = fs::read(path).map_err(|e| ExperimentError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| ExperimentError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads or generates the data, assigns splits, and writes `data.csv`, its
/// sidecar, and the resolved config. Starts a fresh manifest.
pub fn gen_data_stage(config: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    config.validate()?;
    staged(config, Stage::GenData, true, |out| {
        out.bytes(artifact::CONFIG, config.to_json().as_bytes())?;
        let (mut ds, generator) = match &config.data {
            DataSource::Generate(spec) => (spec.generate()?, Some(spec.clone())),
            DataSource::Csv(path) => (load_csv(path)?, None),
        };
        let mut meta = DatasetMeta {
            generator,
            ..DatasetMeta::describe(&ds)
        };
        if !(config.split.keep_existing && ds.split.is_some()) {
            let outcome = split_dataset(&ds, &config.split.fractions, config.split.mode, config.split_seed())?;
            ds = outcome.dataset;
            meta.split_mode = Some(config.split.mode);
            meta.split_fractions = Some(config.split.fractions.clone());
            meta.split_seed = Some(config.split_seed());
        } else if let Some(GeneratorSpec::ClusteredShift(c)) = &meta.generator {
            meta.split_seed = Some(c.seed);
        }
        check_splits(&ds)?;
        save_csv(&ds, out.path(artifact::DATA))?;
        out.note(artifact::DATA);
        write_meta(&meta, out.path(artifact::DATA_META))?;
        out.note(artifact::DATA_META);
        Ok(ds)
    })
}

fn check_splits(ds: &Dataset) -> Result<(), ExperimentError> {
    let sizes = ds.split_sizes();
    if ds.split.is_none() || sizes.contains(&0) {
        return Err(ExperimentError::Other(format!(
            "every split must be nonempty; got train/val/cal/test = {sizes:?}"
        )));
    }
    Ok(())
}

/// Reads the split-tagged dataset written by the gen-data stage.
pub fn load_run_data(dir: &Path) -> Result<Dataset, ExperimentError> {
    let ds = load_csv(require("this stage", dir, artifact::DATA)?)?;
    check_splits(&ds)?;
    Ok(ds)
}

fn load_data_for(stage: &'static str, dir: &Path) -> Result<Dataset, ExperimentError> {
    require(stage, dir, artifact::DATA)?;
    load_run_data(dir)
}

/// Models produced by [`train_stage`]; each is `None` when no selected method needs it.
pub type Trained = (Option<(MoeModel, TrainHistory)>, Option<(DropoutMlp, Vec<f64>)>);

/// Trains the MoE (when any MoE-based method is selected) and the dropout
/// baseline (when selected).
pub fn train_stage(config: &ExperimentConfig) -> Result<Trained, ExperimentError> {
    config.validate()?;
    staged(config, Stage::Train, false, |out| {
        let ds = load_data_for("train", out.dir)?;
        let (train, val) = (ds.view(Split::Train), ds.view(Split::Val));
        let moe = if config.needs_moe() {
            let (model, history) = fit_moe(&train, &val, config)?;
            log::info!(
                "MoE trained: best epoch {} with validation NLL {:.4}",
                history.best_epoch,
                history.best_val_nll
            );
            save_checkpoint(&model, &out.path(artifact::MODEL))?;
            out.note(artifact::MODEL);
            out.json(artifact::TRAIN_HISTORY, &history)?;
            Some((model, history))
        } else {
            None
        };
        let dropout = if config.needs_dropout() {
            let (model, history) = fit_dropout(&train, &val, config)?;
            out.json(artifact::DROPOUT_MODEL, &model)?;
            out.json(artifact::DROPOUT_HISTORY, &history)?;
            Some((model, history))
        } else {
            None
        };
        Ok((moe, dropout))
    })
}

fn calibrate_outputs(
    outputs: &MoeOutputs,
    labels: &[f64],
    kinds: &[ScaleKind],
    alpha: f64,
    epsilon: f64,
) -> Result<CalibrationFile, ExperimentError> {
    let results = kinds
        .iter()
        .map(|&kind| calibrate(labels, &outputs.mean, &outputs.scales(kind), kind, alpha, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CalibrationFile { alpha, epsilon, results })
}

/// Computes conformal quantiles on the CAL split.
pub fn calibrate_stage(config: &ExperimentConfig) -> Result<CalibrationFile, ExperimentError> {
    config.validate()?;
    staged(config, Stage::Calibrate, false, |out| {
        let ds = load_data_for("calibrate", out.dir)?;
        let model = load_checkpoint(&require("calibrate", out.dir, artifact::MODEL)?)?;
        let cal = ds.view(Split::Cal);
        let outputs = MoeOutputs::compute(&model, &cal.x)?;
        let c = &config.calibration;
        let file = calibrate_outputs(&outputs, &cal.y, &c.kinds, c.alpha, c.epsilon)?;
        for r in &file.results {
            log::info!("calibrated {}: q_hat = {} on {} rows", r.kind, r.q_hat, r.n_cal);
        }
        out.json(artifact::CALIBRATION, &file)?;
        Ok(file)
    })
}

fn gaussian_nll(means: &[f64], variances: &[f64], labels: &[f64]) -> Option<f64> {
    if variances.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let n = labels.len() as f64;
    let total: f64 = means
        .iter()
        .zip(variances)
        .zip(labels)
        .map(|((m, v), y)| 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (y - m).powi(2) / (2.0 * v))
        .sum();
    Some(total / n)
}

/// Builds intervals for every selected method on the TEST split and writes
/// reports, curves, per-row predictions, and disentanglement statistics.
pub fn evaluate_stage(config: &ExperimentConfig, options: &EvaluateOptions) -> Result<RunSummary, ExperimentError> {
    let mut config = config.clone();
    if let Some(alpha) = options.alpha {
        config.calibration.alpha = alpha;
    }
    if let Some(methods) = &options.methods {
        config.methods = methods.clone();
    }
    config.validate()?;
    let config = &config;
    staged(config, Stage::Evaluate, false, |out| {
        let stage = "evaluate";
        let ds = load_data_for(stage, out.dir)?;
        let test = ds.view(Split::Test);
        let alpha = config.calibration.alpha;
        let eval_cfg = config.eval_config();

        let mut intervals: BTreeMap<Method, (Vec<PredictionInterval>, Option<f64>)> = BTreeMap::new();
        let mut moe_test = None;
        if config.needs_moe() {
            let model = load_checkpoint(&require(stage, out.dir, artifact::MODEL)?)?;
            let outputs = MoeOutputs::compute(&model, &test.x)?;
            let nll = report_nll(&outputs.predictions, &test.y)?;
            let calibrated = config.methods.iter().any(|m| m.calibrated_kind().is_some());
            let calibration = if calibrated {
                let stored: CalibrationFile = read_json(&require(stage, out.dir, artifact::CALIBRATION)?)?;
                let c = &config.calibration;
                let covers = c.kinds.iter().all(|&k| stored.get(k).is_some());
                if stored.alpha == c.alpha && stored.epsilon == c.epsilon && covers {
                    Some(stored)
                } else {
                    log::info!("recalibrating at alpha = {alpha}");
                    let cal = ds.view(Split::Cal);
                    let cal_out = MoeOutputs::compute(&model, &cal.x)?;
                    Some(calibrate_outputs(&cal_out, &cal.y, &c.kinds, c.alpha, c.epsilon)?)
                }
            } else {
                None
            };
            for &m in config.methods.iter().filter(|m| m.uses_moe()) {
                let calib = m.calibrated_kind().and_then(|k| calibration.as_ref()?.get(k));
                intervals.insert(m, (method_intervals(m, &outputs, calib, alpha)?, Some(nll)));
            }
            moe_test = Some(outputs);
        }
        let mut dropout_test = None;
        if config.needs_dropout() {
            let model: DropoutMlp = read_json(&require(stage, out.dir, artifact::DROPOUT_MODEL)?)?;
            let seed = Rng::new(config.training.seed).named("mc-predict").next_u64();
            let (means, vars): (Vec<f64>, Vec<f64>) =
                mc_predict_batch(&model, &test.x, config.dropout.passes, seed)?.into_iter().unzip();
            let ivs = means.iter().zip(&vars).map(|(&m, &v)| mc_intervals(m, v, alpha)).collect();
            intervals.insert(Method::McDropout, (ivs, gaussian_nll(&means, &vars, &test.y)));
            dropout_test = Some((means, vars));
        }

        let mut evaluations = BTreeMap::new();
        let mut group_tables: Vec<(String, GroupCoverageTable)> = Vec::new();
        for (method, (ivs, nll)) in &intervals {
            let eval = evaluate_method(method.as_str(), ivs, &test.y, test.groups.as_deref(), *nll, &eval_cfg)?;
            out.json(&artifact::metrics(*method), &eval.report)?;
            let name = artifact::sparsification(*method);
            write_sparsification_csv(&out.path(&name), &eval.sparsification)?;
            out.note(&name);
            for (&j, bins) in &eval.ssc {
                let name = artifact::ssc(*method, j);
                write_ssc_csv(&out.path(&name), bins)?;
                out.note(&name);
            }
            if let Some(t) = &eval.groups {
                group_tables.push((method.to_string(), t.clone()));
            }
            evaluations.insert(*method, eval);
        }
        write_group_csv(&out.path(artifact::GROUP_COVERAGE), &group_tables)?;
        out.note(artifact::GROUP_COVERAGE);

        write_predictions(out, &test.rows, &test.y, moe_test.as_ref(), dropout_test.as_ref())?;

        let disentangle = match &moe_test {
            Some(o) => match disentangle_stats(&o.aleatoric, &o.epistemic) {
                Ok(stats) => {
                    out.json(artifact::DISENTANGLE, &stats)?;
                    Some(stats)
                }
                Err(e) => {
                    log::warn!("skipping disentanglement statistics: {e}");
                    None
                }
            },
            None => None,
        };
        Ok(RunSummary {
            evaluations,
            disentangle,
        })
    })
}

/// Columns: `row,target,mean,epistemic,aleatoric,dropout_mean,dropout_sd`;
/// cells for models that were not evaluated are empty.
fn write_predictions(
    out: &mut Outputs<'_>,
    rows: &[usize],
    labels: &[f64],
    moe: Option<&MoeOutputs>,
    dropout: Option<&(Vec<f64>, Vec<f64>)>,
) -> Result<(), ExperimentError> {
    let path = out.path(artifact::PREDICTIONS);
    let csv_err = |e: csv::Error| ExperimentError::Other(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["row", "target", "mean", "epistemic", "aleatoric", "dropout_mean", "dropout_sd"])
        .map_err(csv_err)?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for (i, (&row, &y)) in rows.iter().zip(labels).enumerate() {
        w.write_record([
            row.to_string(),
            y.to_string(),
            cell(moe.map(|o| o.mean[i])),
            cell(moe.map(|o| o.epistemic[i])),
            cell(moe.map(|o| o.aleatoric[i])),
            cell(dropout.map(|d| d.0[i])),
            cell(dropout.map(|d| d.1[i].max(0.0).sqrt())),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(&path, e))?;
    out.note(artifact::PREDICTIONS);
    Ok(())
}

/// All four stages in order, each reading what the previous one wrote.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    gen_data_stage(config)?;
    train_stage(config)?;
    if config.methods.iter().any(|m| m.calibrated_kind().is_some()) {
        calibrate_stage(config)?;
    }
    evaluate_stage(config, &EvaluateOptions::default())
}
