use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GateKind, MoeError, MoeModel};
use crate::numerics::Mlp;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "tessera-moe";

/// On-disk form of a [`MoeModel`]. Floats are written in shortest
/// round-trip form so load(save(m)) == m bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub experts: usize,
    pub sigma2_min: f64,
    pub gate_kind: GateKind,
    pub gate: Mlp,
    pub expert_nets: Vec<Mlp>,
}

impl From<&MoeModel> for Checkpoint {
    fn from(m: &MoeModel) -> Self {
        Self {
            format: FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: m.input_dim(),
            experts: m.num_experts(),
            sigma2_min: m.sigma2_min,
            gate_kind: m.gate_kind,
            gate: m.gate.clone(),
            expert_nets: m.experts.clone(),
        }
    }
}

impl TryFrom<Checkpoint> for MoeModel {
    type Error = MoeError;

    fn try_from(c: Checkpoint) -> Result<Self, MoeError> {
        if c.format != FORMAT {
            return Err(MoeError::Format(format!("unexpected format tag {:?}", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(MoeError::Format(format!("unsupported version {}", c.version)));
        }
        if c.expert_nets.len() != c.experts {
            return Err(MoeError::Format(format!(
                "header says {} experts, found {}",
                c.experts,
                c.expert_nets.len()
            )));
        }
        // re-validate layer shapes; serde alone accepts any Matrix/bias pair
        let gate = Mlp::from_layers(c.gate.layers().to_vec())?;
        let experts = c
            .expert_nets
            .into_iter()
            .map(|e| Mlp::from_layers(e.layers().to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let model = MoeModel::from_parts(gate, experts, c.gate_kind, c.sigma2_min)?;
        if model.input_dim() != c.input_dim {
            return Err(MoeError::Format(format!(
                "header input_dim {} but gate expects {}",
                c.input_dim,
                model.input_dim()
            )));
        }
        Ok(model)
    }
}

pub fn save_checkpoint(model: &MoeModel, path: &Path) -> Result<(), MoeError> {
    let json = serde_json::to_string_pretty(&Checkpoint::from(model)).map_err(|e| MoeError::Format(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MoeModel, MoeError> {
    let text = fs::read_to_string(path)?;
    let c: Checkpoint = serde_json::from_str(&text).map_err(|e| MoeError::Format(e.to_string()))?;
    c.try_into()
}
