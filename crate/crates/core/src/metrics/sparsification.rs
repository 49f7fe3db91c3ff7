use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricsError};

/// Remaining-set RMSE as the most uncertain (model) or largest-error
/// (oracle) points are removed, one value per removal fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    pub model_rmse: Vec<f64>,
    pub oracle_rmse: Vec<f64>,
    pub ause: f64,
}

impl SparsificationCurve {
    pub fn sparsification_error(&self) -> Vec<f64> {
        self.model_rmse
            .iter()
            .zip(&self.oracle_rmse)
            .map(|(m, o)| m - o)
            .collect()
    }
}

/// {0, 0.05, …, 0.95}.
pub fn default_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 / 20.0).collect()
}

/// RMSE of the points left after dropping the first `k` of `order`, for
/// each `k` in `drops`.
fn remaining_rmse(order: &[usize], errors: &[f64], drops: &[usize]) -> Vec<f64> {
    let n = order.len();
    // tail[m] = Σ e² over order[m..]
    let mut tail = vec![0.0; n + 1];
    for m in (0..n).rev() {
        let e = errors[order[m]];
        tail[m] = tail[m + 1] + e * e;
    }
    drops
        .iter()
        .map(|&k| (tail[k] / (n - k) as f64).sqrt())
        .collect()
}

fn descending_order(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

/// Sparsification curves and AUSE (trapezoidal area between model and
/// oracle curves over `grid`). Ties in either ordering break by index.
pub fn sparsification(uncertainty: &[f64], errors: &[f64], grid: &[f64]) -> Result<SparsificationCurve, MetricsError> {
    check_lengths(uncertainty.len(), errors.len())?;
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(MetricsError::InvalidGrid("grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MetricsError::InvalidGrid("grid must be strictly ascending".into()));
    }
    if grid[grid.len() - 1] >= 1.0 {
        return Err(MetricsError::InvalidGrid("grid must stop before 1".into()));
    }
    let n = errors.len();
    let abs_err: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let drops: Vec<usize> = grid
        .iter()
        .map(|&f| (((f * n as f64) + 1e-9).floor() as usize).min(n - 1))
        .collect();
    let model_rmse = remaining_rmse(&descending_order(uncertainty), &abs_err, &drops);
    let oracle_rmse = remaining_rmse(&descending_order(&abs_err), &abs_err, &drops);
    let diff: Vec<f64> = model_rmse.iter().zip(&oracle_rmse).map(|(m, o)| m - o).collect();
    let ause = grid
        .windows(2)
        .zip(diff.windows(2))
        .map(|(g, d)| (g[1] - g[0]) * 0.5 * (d[0] + d[1]))
        .sum();
    Ok(SparsificationCurve {
        fractions: grid.to_vec(),
        model_rmse,
        oracle_rmse,
        ause,
    })
}
