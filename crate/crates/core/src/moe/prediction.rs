use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MoeError;
use crate::numerics::log_sum_exp;

/// Per-input mixture parameters `(w_k, μ_k, σ²_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePrediction {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl MixturePrediction {
    /// Validates that `weights` is a probability vector and every variance is
    /// positive.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self, MoeError> {
        let k = weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return Err(MoeError::InvalidMixture(format!(
                "component lengths differ or are empty: w={}, mu={}, sigma2={}",
                k,
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MoeError::InvalidMixture("weights are not a probability vector".into()));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(MoeError::InvalidMixture("variances must be positive and finite".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(MoeError::InvalidMixture("means must be finite".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Self {
        Self {
            weights,
            means,
            variances,
        }
    }

    pub fn num_experts(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Predictive mean `Σ_k w_k μ_k`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Unweighted expert mean `(1/K) Σ_k μ_k`.
    pub fn unweighted_mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.means.len() as f64
    }

    /// Aleatoric scale `sqrt(Σ_k w_k σ²_k)`, in units of the target.
    pub fn aleatoric(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Epistemic scale: population standard deviation of the expert means.
    /// Gate weights play no part.
    pub fn epistemic(&self) -> f64 {
        let first = self.means[0];
        if self.means.iter().all(|&m| m == first) {
            return 0.0;
        }
        let center = self.unweighted_mean();
        let k = self.means.len() as f64;
        (self.means.iter().map(|m| (m - center).powi(2)).sum::<f64>() / k).sqrt()
    }

    /// `ln p(y | x)` via log-sum-exp over components.
    pub fn log_pdf(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&w, &m), &v)| w.ln() + gaussian_log_density(y, m, v))
            .collect();
        log_sum_exp(&terms)
    }

    /// Mixture density `Σ_k w_k N(y; μ_k, σ²_k)`.
    pub fn pdf(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&w, &m), &v)| w * gaussian_log_density(y, m, v).exp())
            .sum()
    }
}

pub(crate) fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    let r = y - mean;
    -0.5 * (2.0 * PI * variance).ln() - r * r / (2.0 * variance)
}

/// Free-function form of [`MixturePrediction::aleatoric`].
pub fn aleatoric_scale(pred: &MixturePrediction) -> f64 {
    pred.aleatoric()
}

/// Free-function form of [`MixturePrediction::pdf`].
pub fn mixture_pdf(pred: &MixturePrediction, y: f64) -> f64 {
    pred.pdf(y)
}
