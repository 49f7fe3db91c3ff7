use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::conformal::ScaleKind;
use crate::data::{GeneratorSpec, HeteroscedasticConfig, NoiseProfile, SplitFractions, SplitMode};
use crate::mcdropout::DropoutConfig;
use crate::metrics::{default_grid, EvalConfig};
use crate::moe::{MoeConfig, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

/// The six interval methods a run can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TesseraE,
    TesseraA,
    ClassicalCp,
    MoeE,
    MoeA,
    McDropout,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TesseraE,
        Method::TesseraA,
        Method::ClassicalCp,
        Method::MoeE,
        Method::MoeA,
        Method::McDropout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TesseraE => "tessera_e",
            Method::TesseraA => "tessera_a",
            Method::ClassicalCp => "classical_cp",
            Method::MoeE => "moe_e",
            Method::MoeA => "moe_a",
            Method::McDropout => "mc_dropout",
        }
    }

    /// Conformal scale a calibrated method needs; `None` for uncalibrated ones.
    pub fn calibrated_kind(self) -> Option<ScaleKind> {
        match self {
            Method::TesseraE => Some(ScaleKind::Epistemic),
            Method::TesseraA => Some(ScaleKind::Aleatoric),
            Method::ClassicalCp => Some(ScaleKind::Constant),
            _ => None,
        }
    }

    pub fn uses_moe(self) -> bool {
        self != Method::McDropout
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Generate(GeneratorSpec),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub fractions: SplitFractions,
    /// Defaults to the training seed.
    pub seed: Option<u64>,
    /// Use split tags already present in the data instead of re-splitting.
    pub keep_existing: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            mode: SplitMode::Random,
            fractions: SplitFractions::default(),
            seed: None,
            keep_existing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSpec {
    pub alpha: f64,
    pub epsilon: f64,
    pub kinds: Vec<ScaleKind>,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 1e-8,
            kinds: ScaleKind::ALL.to_vec(),
        }
    }
}

/// Metric settings; the nominal level comes from the calibration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    pub etas: Vec<f64>,
    pub primary_eta: f64,
    pub ssc_bins: Vec<usize>,
    pub sparsification_grid: Vec<f64>,
    pub group_min_n: usize,
    pub group_top_k: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            etas: e.etas,
            primary_eta: e.primary_eta,
            ssc_bins: e.ssc_bins,
            sparsification_grid: default_grid(),
            group_min_n: e.group_min_n,
            group_top_k: e.group_top_k,
        }
    }
}

impl MetricSpec {
    pub fn eval_config(&self, alpha: f64) -> EvalConfig {
        EvalConfig {
            alpha,
            etas: self.etas.clone(),
            primary_eta: self.primary_eta,
            ssc_bins: self.ssc_bins.clone(),
            sparsification_grid: self.sparsification_grid.clone(),
            group_min_n: self.group_min_n,
            group_top_k: self.group_top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub model: MoeConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub dropout: DropoutConfig,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            data: DataSource::Generate(GeneratorSpec::Heteroscedastic(HeteroscedasticConfig {
                n: 5000,
                d: 4,
                noise: NoiseProfile::Linear { base: 0.1, slope: 0.9 },
                seed: 0,
            })),
            split: SplitSpec::default(),
            model: MoeConfig::default(),
            training: TrainConfig::default(),
            dropout: DropoutConfig::default(),
            calibration: CalibrationSpec::default(),
            metrics: MetricSpec::default(),
            methods: all_methods(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical JSON form, with the output directory
    /// blanked so relocating a run does not change it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn eval_config(&self) -> EvalConfig {
        self.metrics.eval_config(self.calibration.alpha)
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.training.seed)
    }

    pub fn needs_moe(&self) -> bool {
        self.methods.iter().any(|m| m.uses_moe())
    }

    pub fn needs_dropout(&self) -> bool {
        self.methods.contains(&Method::McDropout)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: String| Err(ExperimentError::Config(m));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        self.split.fractions.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.model.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let t = &self.training;
        if t.batch_size == 0 || !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return fail("training needs batch_size ≥ 1 and a positive learning_rate".into());
        }
        let d = &self.dropout;
        if !(0.0..1.0).contains(&d.dropout) || d.passes < 2 || d.batch_size == 0 || d.hidden.is_empty() {
            return fail("dropout needs p in [0, 1), passes ≥ 2, batch_size ≥ 1, and a hidden layer".into());
        }
        if !(d.learning_rate > 0.0 && d.learning_rate.is_finite()) {
            return fail("dropout learning_rate must be positive".into());
        }
        let c = &self.calibration;
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", c.alpha));
        }
        if !(c.epsilon >= 0.0 && c.epsilon.is_finite()) {
            return fail(format!("epsilon must be finite and nonnegative, got {}", c.epsilon));
        }
        let m = &self.metrics;
        if m.etas.is_empty() || m.etas.iter().chain([&m.primary_eta]).any(|e| !(*e > 0.0 && e.is_finite())) {
            return fail("CWC etas must be a nonempty list of positive numbers".into());
        }
        if m.ssc_bins.contains(&0) {
            return fail("SSC bin counts must be positive".into());
        }
        let g = &m.sparsification_grid;
        if g.is_empty() || g[0] != 0.0 || g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|f| !(0.0..1.0).contains(f)) {
            return fail("sparsification grid must start at 0, increase strictly, and stay below 1".into());
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        for method in &self.methods {
            if let Some(kind) = method.calibrated_kind() {
                if !c.kinds.contains(&kind) {
                    return fail(format!("method {method} needs calibration kind {kind}"));
                }
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return fail("output_dir is empty".into());
        }
        Ok(())
    }
}
