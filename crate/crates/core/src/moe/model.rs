use serde::{Deserialize, Serialize};

use super::{MixturePrediction, MoeError};
use crate::numerics::{log_sum_exp, softplus, Activation, Matrix, Mlp, MlpCache, Rng};

/// Gate architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateKind {
    /// Linear map followed by softmax.
    Linear,
    /// One tanh hidden layer, then softmax.
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoeConfig {
    pub experts: usize,
    pub hidden: usize,
    pub gate: GateKind,
    pub sigma2_min: f64,
}

impl Default for MoeConfig {
    fn default() -> Self {
        Self {
            experts: 4,
            hidden: 64,
            gate: GateKind::Linear,
            sigma2_min: 1e-6,
        }
    }
}

impl MoeConfig {
    pub fn validate(&self) -> Result<(), MoeError> {
        if self.experts == 0 {
            return Err(MoeError::Config("at least one expert is required".into()));
        }
        if self.hidden == 0 {
            return Err(MoeError::Config("expert hidden width must be positive".into()));
        }
        if let GateKind::Mlp { hidden: 0 } = self.gate {
            return Err(MoeError::Config("gate hidden width must be positive".into()));
        }
        if !(self.sigma2_min > 0.0 && self.sigma2_min.is_finite()) {
            return Err(MoeError::Config("sigma2_min must be positive".into()));
        }
        Ok(())
    }
}

/// Gate plus `K` experts. Each expert is a one-hidden-layer tanh MLP whose
/// two outputs are the mean and the raw variance `r`; the variance is
/// `softplus(r) + sigma2_min`.
///
/// Flat parameter layout: gate parameters, then each expert in order.
#[derive(Debug, Clone, PartialEq)]
pub struct MoeModel {
    pub(crate) gate: Mlp,
    pub(crate) experts: Vec<Mlp>,
    pub(crate) gate_kind: GateKind,
    pub(crate) sigma2_min: f64,
}

/// Scratch buffers for per-sample passes.
#[derive(Debug, Default)]
pub(crate) struct MoeWorkspace {
    pub gate: MlpCache,
    pub experts: Vec<MlpCache>,
}

/// Forward quantities for one input, in the form the loss needs.
#[derive(Debug, Clone, Default)]
pub(crate) struct RawForward {
    pub log_weights: Vec<f64>,
    pub means: Vec<f64>,
    pub raw_var: Vec<f64>,
    pub variances: Vec<f64>,
}

impl MoeModel {
    pub fn new(input_dim: usize, config: &MoeConfig, rng: &mut Rng) -> Result<Self, MoeError> {
        config.validate()?;
        if input_dim == 0 {
            return Err(MoeError::Config("input dimension must be positive".into()));
        }
        let mut gate_rng = rng.named("gate");
        let gate = match config.gate {
            GateKind::Linear => Mlp::new(&[input_dim, config.experts], Activation::Tanh, &mut gate_rng)?,
            GateKind::Mlp { hidden } => Mlp::new(
                &[input_dim, hidden, config.experts],
                Activation::Tanh,
                &mut gate_rng,
            )?,
        };
        let experts = (0..config.experts)
            .map(|k| {
                let mut r = rng.named("expert").child(k as u64);
                Mlp::new(&[input_dim, config.hidden, 2], Activation::Tanh, &mut r)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            gate,
            experts,
            gate_kind: config.gate,
            sigma2_min: config.sigma2_min,
        })
    }

    /// Rebuilds a model from parts, checking that shapes agree.
    pub fn from_parts(gate: Mlp, experts: Vec<Mlp>, gate_kind: GateKind, sigma2_min: f64) -> Result<Self, MoeError> {
        if experts.is_empty() {
            return Err(MoeError::Config("at least one expert is required".into()));
        }
        let d = gate.input_width();
        if gate.output_width() != experts.len() {
            return Err(MoeError::Config(format!(
                "gate has {} outputs but there are {} experts",
                gate.output_width(),
                experts.len()
            )));
        }
        for (k, e) in experts.iter().enumerate() {
            if e.input_width() != d || e.output_width() != 2 {
                return Err(MoeError::Config(format!("expert {k} has widths {:?}", e.widths())));
            }
        }
        let hidden_layers = match gate_kind {
            GateKind::Linear => 0,
            GateKind::Mlp { .. } => 1,
        };
        if gate.num_hidden_layers() != hidden_layers {
            return Err(MoeError::Config("gate depth does not match gate kind".into()));
        }
        if !(sigma2_min > 0.0) {
            return Err(MoeError::Config("sigma2_min must be positive".into()));
        }
        Ok(Self {
            gate,
            experts,
            gate_kind,
            sigma2_min,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn input_dim(&self) -> usize {
        self.gate.input_width()
    }

    pub fn sigma2_min(&self) -> f64 {
        self.sigma2_min
    }

    pub fn gate_kind(&self) -> GateKind {
        self.gate_kind
    }

    pub fn gate(&self) -> &Mlp {
        &self.gate
    }

    pub fn experts(&self) -> &[Mlp] {
        &self.experts
    }

    pub fn num_params(&self) -> usize {
        self.gate.num_params() + self.experts.iter().map(Mlp::num_params).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.gate.write_params(&mut out);
        for e in &self.experts {
            e.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, src: &[f64]) -> Result<(), MoeError> {
        if src.len() != self.num_params() {
            return Err(MoeError::Config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                src.len()
            )));
        }
        let mut off = self.gate.set_params(src)?;
        for e in &mut self.experts {
            off += e.set_params(&src[off..])?;
        }
        Ok(())
    }

    /// Offsets of each block (gate first) in the flat parameter vector.
    pub(crate) fn block_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.experts.len() + 1);
        let mut off = 0;
        offs.push(off);
        off += self.gate.num_params();
        for e in &self.experts {
            offs.push(off);
            off += e.num_params();
        }
        offs
    }

    pub(crate) fn workspace(&self) -> MoeWorkspace {
        MoeWorkspace {
            gate: MlpCache::default(),
            experts: vec![MlpCache::default(); self.experts.len()],
        }
    }

    pub(crate) fn forward_raw(&self, x: &[f64], ws: &mut MoeWorkspace, out: &mut RawForward) -> Result<(), MoeError> {
        self.gate.forward_cached(x, None, &mut ws.gate)?;
        let logits = ws.gate.output();
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(MoeError::NonFinite { layer: "gate".into() });
        }
        let lse = log_sum_exp(logits);
        out.log_weights.clear();
        out.log_weights.extend(logits.iter().map(|l| l - lse));
        out.means.clear();
        out.raw_var.clear();
        out.variances.clear();
        for (k, (expert, cache)) in self.experts.iter().zip(ws.experts.iter_mut()).enumerate() {
            expert.forward_cached(x, None, cache)?;
            let o = cache.output();
            if !(o[0].is_finite() && o[1].is_finite()) {
                return Err(MoeError::NonFinite {
                    layer: format!("expert {k}"),
                });
            }
            out.means.push(o[0]);
            out.raw_var.push(o[1]);
            out.variances.push(softplus(o[1]) + self.sigma2_min);
        }
        Ok(())
    }

    /// Mixture parameters for one input.
    pub fn forward(&self, x: &[f64]) -> Result<MixturePrediction, MoeError> {
        let mut ws = self.workspace();
        let mut raw = RawForward::default();
        self.forward_raw(x, &mut ws, &mut raw)?;
        Ok(raw.into_prediction())
    }

    /// Mixture parameters for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<MixturePrediction>, MoeError> {
        let mut ws = self.workspace();
        let mut raw = RawForward::default();
        x.iter_rows()
            .map(|row| {
                self.forward_raw(row, &mut ws, &mut raw)?;
                Ok(raw.clone().into_prediction())
            })
            .collect()
    }
}

impl RawForward {
    pub(crate) fn into_prediction(self) -> MixturePrediction {
        let weights = self.log_weights.iter().map(|l| l.exp()).collect();
        MixturePrediction::from_parts_unchecked(weights, self.means, self.variances)
    }
}

/// Concatenates two feature blocks row by row.
pub fn concat_features(a: &Matrix, b: &Matrix) -> Result<Matrix, MoeError> {
    if a.rows() != b.rows() {
        return Err(MoeError::Config(format!(
            "feature blocks have {} and {} rows",
            a.rows(),
            b.rows()
        )));
    }
    let rows: Vec<Vec<f64>> = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, a.cols() + b.cols()));
    }
    Ok(Matrix::from_rows(&rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_valid_mixture() {
        let mut rng = Rng::new(3);
        let m = MoeModel::new(5, &MoeConfig::default(), &mut rng).unwrap();
        let p = m.forward(&[0.1, -0.2, 0.3, 0.0, 1.0]).unwrap();
        assert_eq!(p.num_experts(), 4);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.variances().iter().all(|&v| v >= 1e-6));
    }

    #[test]
    fn single_expert_has_no_disagreement() {
        let mut rng = Rng::new(3);
        let cfg = MoeConfig {
            experts: 1,
            ..MoeConfig::default()
        };
        let m = MoeModel::new(2, &cfg, &mut rng).unwrap();
        let p = m.forward(&[0.5, 0.5]).unwrap();
        assert_eq!(p.weights(), &[1.0]);
        assert_eq!(p.mean(), p.means()[0]);
        assert_eq!(p.epistemic(), 0.0);
    }

    #[test]
    fn variance_floor_holds_for_very_negative_raw_output() {
        let mut m = MoeModel::new(1, &MoeConfig { experts: 1, hidden: 2, ..MoeConfig::default() }, &mut Rng::new(0)).unwrap();
        let mut p = m.params();
        let n = p.len();
        // raw-variance bias
        p[n - 1] = -1e4;
        m.set_params(&p).unwrap();
        let pred = m.forward(&[0.0]).unwrap();
        assert!(pred.variances()[0] >= 1e-6);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = Rng::new(9);
        let cfg = MoeConfig {
            gate: GateKind::Mlp { hidden: 3 },
            hidden: 4,
            ..MoeConfig::default()
        };
        let m = MoeModel::new(3, &cfg, &mut rng).unwrap();
        let mut m2 = MoeModel::new(3, &cfg, &mut Rng::new(10)).unwrap();
        assert_ne!(m, m2);
        m2.set_params(&m.params()).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let m = MoeModel::new(3, &MoeConfig::default(), &mut Rng::new(0)).unwrap();
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = MoeConfig {
            experts: 0,
            ..MoeConfig::default()
        };
        assert!(MoeModel::new(2, &bad, &mut Rng::new(0)).is_err());
        let bad = MoeConfig {
            sigma2_min: 0.0,
            ..MoeConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn concat_two_blocks() {
        let a = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = concat_features(&a, &b).unwrap();
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
    }
}
