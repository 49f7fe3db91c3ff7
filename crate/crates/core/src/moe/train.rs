use serde::{Deserialize, Serialize};

use super::{mixture_nll_rows, MoeError, MoeModel};
use crate::numerics::{AdamConfig, AdamState, Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-4,
            seed: 0,
            patience: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss seen during the epoch.
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_train_nll: f64,
    pub initial_val_nll: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_nll: f64,
}

impl TrainHistory {
    pub fn final_train_nll(&self) -> f64 {
        self.epochs.last().map_or(self.initial_train_nll, |e| e.train_nll)
    }
}

/// Minibatch Adam on the mixture NLL. Returns the parameters with the best
/// validation NLL seen (including the initial ones).
pub fn train_moe(
    mut model: MoeModel,
    train: (&Matrix, &[f64]),
    validation: (&Matrix, &[f64]),
    config: &TrainConfig,
) -> Result<(MoeModel, TrainHistory), MoeError> {
    let (x_train, y_train) = train;
    let (x_val, y_val) = validation;
    if x_train.rows() == 0 || x_val.rows() == 0 {
        return Err(MoeError::EmptyBatch);
    }
    if config.batch_size == 0 {
        return Err(MoeError::Config("batch size must be positive".into()));
    }
    let all_train: Vec<usize> = (0..x_train.rows()).collect();
    let all_val: Vec<usize> = (0..x_val.rows()).collect();
    let initial_train_nll = mixture_nll_rows(&model, x_train, y_train, &all_train, None)
        .map_err(|e| diverged(0, e))?;
    let initial_val_nll =
        mixture_nll_rows(&model, x_val, y_val, &all_val, None).map_err(|e| diverged(0, e))?;

    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(
        params.len(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut shuffle_rng = Rng::new(config.seed).named("minibatch");
    let mut best = (0usize, initial_val_nll, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order = all_train.clone();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let loss = mixture_nll_rows(&model, x_train, y_train, batch, Some(&mut grad))
                .map_err(|e| diverged(epoch, e))?;
            adam.step(&mut params, &grad).map_err(|e| diverged(epoch, e.into()))?;
            model.set_params(&params)?;
            loss_sum += loss;
            batches += 1;
        }
        let train_nll = loss_sum / batches as f64;
        let val_nll =
            mixture_nll_rows(&model, x_val, y_val, &all_val, None).map_err(|e| diverged(epoch, e))?;
        history.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
        });
        if val_nll < best.1 {
            best = (epoch, val_nll, params.clone());
        } else if let Some(p) = config.patience {
            if epoch - best.0 >= p {
                break;
            }
        }
    }

    model.set_params(&best.2)?;
    Ok((
        model,
        TrainHistory {
            initial_train_nll,
            initial_val_nll,
            epochs: history,
            best_epoch: best.0,
            best_val_nll: best.1,
        },
    ))
}

fn diverged(epoch: usize, err: MoeError) -> MoeError {
    match err {
        MoeError::NonFinite { layer } => MoeError::Diverged {
            epoch,
            reason: format!("non-finite value in {layer}"),
        },
        MoeError::Numerics(e) => MoeError::Diverged {
            epoch,
            reason: e.to_string(),
        },
        other => other,
    }
}
