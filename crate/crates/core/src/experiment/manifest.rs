use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GenData,
    Train,
    Calibrate,
    Evaluate,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Train => "train",
            Stage::Calibrate => "calibrate",
            Stage::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub config_hash: String,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Run bookkeeping. Holds no timestamps so identical runs produce identical
/// bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// Hash of the config used by the most recent stage.
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<Stage, StageRecord>,
    /// True when any recorded stage failed; its artifacts may be incomplete.
    pub partial: bool,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            format: "tessera-run".into(),
            version: 1,
            config_hash: config.hash(),
            seed: config.training.seed,
            stages: BTreeMap::new(),
            partial: false,
        }
    }

    /// Existing manifest in `dir`, or a fresh one if absent or unreadable.
    pub fn load_or_new(dir: &Path, config: &ExperimentConfig) -> Self {
        fs::read(dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_else(|| Self::new(config))
    }

    pub fn load(dir: &Path) -> Result<Self, ExperimentError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| ExperimentError::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|source| ExperimentError::Json { path, source })
    }

    /// Records a stage outcome. A failed stage keeps whatever artifacts it
    /// managed to write.
    pub fn record(&mut self, stage: Stage, config: &ExperimentConfig, artifacts: Vec<String>, error: Option<String>) {
        self.config_hash = config.hash();
        self.seed = config.training.seed;
        let status = if error.is_some() { StageStatus::Failed } else { StageStatus::Ok };
        self.stages.insert(
            stage,
            StageRecord {
                status,
                config_hash: self.config_hash.clone(),
                artifacts,
                error,
            },
        );
        self.partial = self.stages.values().any(|r| r.status == StageStatus::Failed);
    }

    pub fn save(&self, dir: &Path) -> Result<(), ExperimentError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))
    }
}
