use super::{ExperimentConfig, ExperimentError, Method};
use crate::conformal::{build_intervals, CalibrationResult, PredictionInterval, ScaleKind};
use crate::data::SplitView;
use crate::mcdropout::{train_dropout_mlp, DropoutMlp};
use crate::moe::{train_moe, MixturePrediction, MoeModel, TrainHistory};
use crate::numerics::{normal_quantile, Matrix, Rng};

/// Point prediction and both uncertainty signals for a batch of rows.
#[derive(Debug, Clone)]
pub struct MoeOutputs {
    pub mean: Vec<f64>,
    pub epistemic: Vec<f64>,
    pub aleatoric: Vec<f64>,
    pub predictions: Vec<MixturePrediction>,
}

impl MoeOutputs {
    pub fn compute(model: &MoeModel, x: &Matrix) -> Result<Self, ExperimentError> {
        let predictions = model.predict(x)?;
        Ok(Self {
            mean: predictions.iter().map(MixturePrediction::mean).collect(),
            epistemic: predictions.iter().map(MixturePrediction::epistemic).collect(),
            aleatoric: predictions.iter().map(MixturePrediction::aleatoric).collect(),
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn scales(&self, kind: ScaleKind) -> Vec<f64> {
        match kind {
            ScaleKind::Epistemic => self.epistemic.clone(),
            ScaleKind::Aleatoric => self.aleatoric.clone(),
            ScaleKind::Constant => vec![1.0; self.len()],
        }
    }
}

/// Intervals for one MoE-based method. Calibrated methods need the matching
/// calibration; the raw baselines use `μ̂ ± z_{1−α/2}·S`.
pub fn method_intervals(
    method: Method,
    outputs: &MoeOutputs,
    calibration: Option<&CalibrationResult>,
    alpha: f64,
) -> Result<Vec<PredictionInterval>, ExperimentError> {
    match method {
        Method::TesseraE | Method::TesseraA | Method::ClassicalCp => {
            let kind = method.calibrated_kind().expect("calibrated method");
            let calib = calibration
                .filter(|c| c.kind == kind)
                .ok_or_else(|| ExperimentError::Other(format!("{method} needs a {kind} calibration")))?;
            Ok(build_intervals(calib, &outputs.mean, &outputs.scales(kind))?)
        }
        Method::MoeE | Method::MoeA => {
            let scales = if method == Method::MoeE { &outputs.epistemic } else { &outputs.aleatoric };
            let z = normal_quantile(1.0 - alpha / 2.0);
            Ok(outputs
                .mean
                .iter()
                .zip(scales)
                .map(|(&c, &s)| PredictionInterval::symmetric(c, z * s, s))
                .collect())
        }
        Method::McDropout => Err(ExperimentError::Other("mc_dropout intervals come from the dropout model".into())),
    }
}

/// Initializes and trains the MoE from the config's model and training
/// sections. Initialization draws from the training seed.
pub fn fit_moe(
    train: &SplitView,
    val: &SplitView,
    config: &ExperimentConfig,
) -> Result<(MoeModel, TrainHistory), ExperimentError> {
    if train.y.is_empty() || val.y.is_empty() {
        return Err(ExperimentError::Other("training and validation splits must be nonempty".into()));
    }
    let mut rng = Rng::new(config.training.seed).named("moe-init");
    let model = MoeModel::new(train.x.cols(), &config.model, &mut rng)?;
    Ok(train_moe(model, (&train.x, &train.y), (&val.x, &val.y), &config.training)?)
}

/// Initializes and trains the MC dropout baseline.
pub fn fit_dropout(
    train: &SplitView,
    val: &SplitView,
    config: &ExperimentConfig,
) -> Result<(DropoutMlp, Vec<f64>), ExperimentError> {
    let root = Rng::new(config.training.seed);
    let model = DropoutMlp::init(train.x.cols(), &config.dropout, &mut root.named("dropout-init"))?;
    let train_seed = root.named("dropout-train").next_u64();
    Ok(train_dropout_mlp(model, (&train.x, &train.y), (&val.x, &val.y), &config.dropout, train_seed)?)
}
