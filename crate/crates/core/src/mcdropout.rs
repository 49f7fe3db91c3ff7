//! Monte Carlo dropout baseline: an MLP regressor trained with inverted
//! dropout whose masks stay active at prediction time. The spread of `T`
//! stochastic passes gives a predictive variance, turned into a Gaussian
//! interval with normal quantiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::PredictionInterval;
use crate::numerics::{normal_quantile, Activation, AdamConfig, AdamState, Matrix, Mlp, MlpCache, NumericsError, Rng};

#[derive(Debug, Error)]
pub enum DropoutError {
    #[error("invalid dropout configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropoutConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub passes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            dropout: 0.5,
            passes: 50,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

/// Single-output MLP with dropout on every hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMlp {
    pub net: Mlp,
    pub dropout: f64,
}

impl DropoutMlp {
    pub fn new(net: Mlp, dropout: f64) -> Result<Self, DropoutError> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(DropoutError::Config(format!("dropout rate {dropout} outside [0, 1)")));
        }
        if net.output_width() != 1 {
            return Err(DropoutError::Config("network must have a single output".into()));
        }
        Ok(Self { net, dropout })
    }

    pub fn init(input_dim: usize, config: &DropoutConfig, rng: &mut Rng) -> Result<Self, DropoutError> {
        let mut widths = vec![input_dim];
        widths.extend(&config.hidden);
        widths.push(1);
        Self::new(Mlp::new(&widths, Activation::Relu, rng)?, config.dropout)
    }

    /// Fresh inverted-dropout masks: kept units are scaled by `1/(1−p)`.
    fn sample_masks(&self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let keep = 1.0 - self.dropout;
        self.net.layers()[..self.net.num_hidden_layers()]
            .iter()
            .map(|l| {
                (0..l.fan_out())
                    .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// One stochastic forward pass.
    pub fn sample(&self, x: &[f64], rng: &mut Rng, cache: &mut MlpCache) -> Result<f64, DropoutError> {
        let masks = self.sample_masks(rng);
        self.net.forward_cached(x, Some(&masks), cache)?;
        Ok(cache.output()[0])
    }

    /// Dropout disabled; inverted scaling means no rescaling is needed here.
    pub fn predict_deterministic(&self, x: &[f64]) -> Result<f64, DropoutError> {
        Ok(self.net.forward(x)?[0])
    }
}

/// Minibatch Adam on squared error with dropout active. Keeps the
/// parameters with the lowest deterministic validation MSE.
pub fn train_dropout_mlp(
    mut model: DropoutMlp,
    train: (&Matrix, &[f64]),
    validation: (&Matrix, &[f64]),
    config: &DropoutConfig,
    seed: u64,
) -> Result<(DropoutMlp, Vec<f64>), DropoutError> {
    let (x, y) = train;
    if x.rows() == 0 || config.batch_size == 0 {
        return Err(DropoutError::Config("empty training set or zero batch size".into()));
    }
    let root = Rng::new(seed);
    let mut shuffle_rng = root.named("dropout-minibatch");
    let mut mask_rng = root.named("dropout-masks");
    let mut params = model.net.params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(
        params.len(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut cache = MlpCache::default();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut best = (validation_mse(&model, validation)?, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let out = model.sample(x.row(i), &mut mask_rng, &mut cache)?;
                model.net.backward_acc(&mut cache, &[scale * (out - y[i])], &mut grad)?;
            }
            adam.step(&mut params, &grad).map_err(|e| DropoutError::Diverged {
                epoch,
                reason: e.to_string(),
            })?;
            model.net.set_params(&params)?;
        }
        let val = validation_mse(&model, validation)?;
        if !val.is_finite() {
            return Err(DropoutError::Diverged {
                epoch,
                reason: "validation loss is not finite".into(),
            });
        }
        history.push(val);
        if val < best.0 {
            best = (val, params.clone());
        }
    }
    model.net.set_params(&best.1)?;
    Ok((model, history))
}

fn validation_mse(model: &DropoutMlp, (x, y): (&Matrix, &[f64])) -> Result<f64, DropoutError> {
    let mut total = 0.0;
    for (row, &yi) in x.iter_rows().zip(y) {
        let r = model.predict_deterministic(row)? - yi;
        total += r * r;
    }
    Ok(total / y.len().max(1) as f64)
}

/// Sample mean and unbiased sample variance of `passes` stochastic outputs.
/// Pass `t` draws its masks from child stream `t` of `rng`.
pub fn mc_predict(model: &DropoutMlp, x: &[f64], passes: usize, rng: &Rng) -> Result<(f64, f64), DropoutError> {
    if passes < 2 {
        return Err(DropoutError::Config(format!("need at least 2 passes, got {passes}")));
    }
    let mut cache = MlpCache::default();
    let outputs = (0..passes)
        .map(|t| model.sample(x, &mut rng.child(t as u64), &mut cache))
        .collect::<Result<Vec<_>, _>>()?;
    let n = passes as f64;
    // shifted by the first pass: identical outputs give exactly zero variance
    let pivot = outputs[0];
    let offset = outputs.iter().map(|o| o - pivot).sum::<f64>() / n;
    let var = outputs.iter().map(|o| (o - pivot - offset).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((pivot + offset, var))
}

/// [`mc_predict`] for every row; row `i` uses child stream `i` of `seed`.
pub fn mc_predict_batch(
    model: &DropoutMlp,
    x: &Matrix,
    passes: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, DropoutError> {
    let root = Rng::new(seed).named("mc-predict");
    x.iter_rows()
        .enumerate()
        .map(|(i, row)| mc_predict(model, row, passes, &root.child(i as u64)))
        .collect()
}

/// Gaussian interval `mean ± z_{1−α/2}·sqrt(variance)`.
pub fn mc_intervals(mean: f64, variance: f64, alpha: f64) -> PredictionInterval {
    let sd = variance.max(0.0).sqrt();
    PredictionInterval::symmetric(mean, normal_quantile(1.0 - alpha / 2.0) * sd, sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_ones(d: usize, h: usize, p: f64) -> DropoutMlp {
        let mut net = Mlp::zeros(&[d, h, 1], Activation::Identity).unwrap();
        let n = net.num_params();
        let mut params = vec![1.0; n];
        // zero biases: hidden bias sits after the d×h weights, output bias is last
        for b in &mut params[d * h..d * h + h] {
            *b = 0.0;
        }
        params[n - 1] = 0.0;
        net.set_params(&params).unwrap();
        DropoutMlp::new(net, p).unwrap()
    }

    #[test]
    fn no_dropout_means_no_variance() {
        let m = DropoutMlp::init(3, &DropoutConfig { dropout: 0.0, ..DropoutConfig::default() }, &mut Rng::new(0)).unwrap();
        let (mean, var) = mc_predict(&m, &[0.1, 0.2, 0.3], 20, &Rng::new(1)).unwrap();
        assert_eq!(var, 0.0);
        assert_eq!(mean, m.predict_deterministic(&[0.1, 0.2, 0.3]).unwrap());
    }

    #[test]
    fn reproducible_with_seed() {
        let m = DropoutMlp::init(2, &DropoutConfig::default(), &mut Rng::new(0)).unwrap();
        let a = mc_predict(&m, &[0.5, -0.5], 50, &Rng::new(7)).unwrap();
        let b = mc_predict(&m, &[0.5, -0.5], 50, &Rng::new(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_passes_rejected() {
        let m = linear_ones(2, 2, 0.5);
        assert!(matches!(mc_predict(&m, &[1.0, 1.0], 1, &Rng::new(0)), Err(DropoutError::Config(_))));
    }

    #[test]
    fn bernoulli_mask_variance_matches_closed_form() {
        // output = Σ_j m_j·d/(1−p), m_j ~ Bernoulli(1−p): variance h·d²·p/(1−p)
        let (d, h, p) = (3usize, 4usize, 0.5);
        let m = linear_ones(d, h, p);
        let (mean, var) = mc_predict(&m, &vec![1.0; d], 100_000, &Rng::new(11)).unwrap();
        let expected_var = h as f64 * (d * d) as f64 * p / (1.0 - p);
        assert!((var / expected_var - 1.0).abs() < 0.05, "{var} vs {expected_var}");
        assert!((mean - (h * d) as f64).abs() < 0.1, "{mean}");
    }

    #[test]
    fn variance_grows_with_dropout_rate() {
        let base = DropoutMlp::init(4, &DropoutConfig::default(), &mut Rng::new(3)).unwrap();
        let x = [0.3, -0.1, 0.8, 0.2];
        let avg_var = |p: f64| {
            let m = DropoutMlp::new(base.net.clone(), p).unwrap();
            (0..20)
                .map(|s| mc_predict(&m, &x, 200, &Rng::new(s)).unwrap().1)
                .sum::<f64>()
                / 20.0
        };
        let (v1, v3, v5) = (avg_var(0.1), avg_var(0.3), avg_var(0.5));
        assert!(v1 <= v3 && v3 <= v5, "{v1} {v3} {v5}");
    }

    #[test]
    fn mean_error_shrinks_with_more_passes() {
        let m = linear_ones(2, 6, 0.5);
        let x = [1.0, 1.0];
        let spread = |t: usize| {
            let means: Vec<f64> = (0..40).map(|s| mc_predict(&m, &x, t, &Rng::new(s)).unwrap().0).collect();
            let mu = means.iter().sum::<f64>() / means.len() as f64;
            means.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64
        };
        // variance of the mean is ∝ 1/T: 16x the passes, roughly 1/16 the spread
        let ratio = spread(25) / spread(400);
        assert!(ratio > 8.0 && ratio < 32.0, "{ratio}");
    }

    #[test]
    fn interval_examples() {
        let iv = mc_intervals(2.0, 0.0, 0.1);
        assert_eq!((iv.lower, iv.upper), (2.0, 2.0));
        let iv = mc_intervals(0.0, 1.0, 0.1);
        assert!((iv.upper - 1.6448536).abs() < 1e-6);
        let wide = mc_intervals(0.0, 1.0, 0.05);
        assert!(wide.lower < iv.lower && wide.upper > iv.upper);
    }

    #[test]
    fn training_fits_a_line() {
        let mut rng = Rng::new(0);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.uniform_range(-1.0, 1.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 0.5).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = DropoutConfig {
            hidden: vec![16],
            dropout: 0.1,
            epochs: 30,
            learning_rate: 1e-2,
            ..DropoutConfig::default()
        };
        let m = DropoutMlp::init(1, &cfg, &mut Rng::new(1)).unwrap();
        let start = validation_mse(&m, (&x, &y)).unwrap();
        let (trained, hist) = train_dropout_mlp(m, (&x, &y), (&x, &y), &cfg, 5).unwrap();
        let end = validation_mse(&trained, (&x, &y)).unwrap();
        assert_eq!(hist.len(), 30);
        assert!(end < 0.1 * start, "{start} -> {end}");
    }
}
