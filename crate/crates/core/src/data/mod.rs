//! Datasets, synthetic generators with known noise, split assignment, and
//! CSV / JSON-sidecar persistence.

mod generate;
mod io;
mod split;

pub use generate::{
    gen_clustered_shift, gen_heteroscedastic, target_function, ClusterShiftConfig, GeneratorSpec,
    HeteroscedasticConfig, NoiseProfile, ShiftMode,
};
pub use io::{load_csv, read_meta, save_csv, write_meta, DatasetMeta};
pub use split::{split_dataset, SplitFractions, SplitMode, SplitOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset: {0}")]
    Invalid(String),

    #[error("unknown noise profile {0:?}")]
    UnknownProfile(String),

    #[error("infeasible generator configuration: {0}")]
    Infeasible(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Cal,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Cal, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Cal => "cal",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "cal" => Ok(Split::Cal),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// Features, targets, and optional per-row annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub groups: Option<Vec<String>>,
    /// Ground-truth noise scale, synthetic data only.
    pub sigma_true: Option<Vec<f64>>,
    pub split: Option<Vec<Split>>,
}

/// Rows of one split, copied out of a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitView {
    pub rows: Vec<usize>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub groups: Option<Vec<String>>,
    pub sigma_true: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self, DataError> {
        let ds = Self {
            x,
            y,
            groups: None,
            sigma_true: None,
            split: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.y.len();
        if self.x.rows() != n {
            return Err(DataError::Invalid(format!("{} feature rows but {} targets", self.x.rows(), n)));
        }
        if let Some(g) = &self.groups {
            if g.len() != n {
                return Err(DataError::Invalid(format!("{} group labels for {n} rows", g.len())));
            }
            if g.iter().any(String::is_empty) {
                return Err(DataError::Invalid("empty group label".into()));
            }
        }
        if let Some(s) = &self.sigma_true {
            if s.len() != n {
                return Err(DataError::Invalid(format!("{} sigma_true values for {n} rows", s.len())));
            }
        }
        if let Some(s) = &self.split {
            if s.len() != n {
                return Err(DataError::Invalid(format!("{} split tags for {n} rows", s.len())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Row indices tagged `split`, ascending. Empty when untagged.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.split.as_ref().map_or_else(Vec::new, |tags| {
            tags.iter()
                .enumerate()
                .filter(|(_, &t)| t == split)
                .map(|(i, _)| i)
                .collect()
        })
    }

    pub fn split_sizes(&self) -> [usize; 4] {
        Split::ALL.map(|s| self.indices(s).len())
    }

    pub fn select(&self, rows: &[usize]) -> SplitView {
        SplitView {
            rows: rows.to_vec(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            groups: self.groups.as_ref().map(|g| rows.iter().map(|&i| g[i].clone()).collect()),
            sigma_true: self.sigma_true.as_ref().map(|s| rows.iter().map(|&i| s[i]).collect()),
        }
    }

    pub fn view(&self, split: Split) -> SplitView {
        self.select(&self.indices(split))
    }
}
