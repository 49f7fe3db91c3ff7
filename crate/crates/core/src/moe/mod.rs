//! Dense mixture-of-experts regressor with Gaussian experts.
//!
//! Every expert emits a mean and a variance; a softmax gate mixes them into
//! a Gaussian mixture. From a single forward pass we read off the predictive
//! mean, an aleatoric scale (gate-weighted root of the expert variances) and
//! an epistemic scale (unweighted spread of the expert means).

mod checkpoint;
mod loss;
mod model;
mod prediction;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{mean_nll, mixture_nll, mixture_nll_rows};
pub use model::{concat_features, GateKind, MoeConfig, MoeModel};
pub use prediction::{aleatoric_scale, mixture_pdf, MixturePrediction};
pub use train::{train_moe, EpochRecord, TrainConfig, TrainHistory};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum MoeError {
    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("non-finite activation in {layer}")]
    NonFinite { layer: String },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint format: {0}")]
    Format(String),
}
