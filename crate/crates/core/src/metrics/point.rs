use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricsError};
use crate::moe::MixturePrediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub pearson: f64,
    pub spearman: f64,
}

pub fn rmse(preds: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    let ss: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum();
    Ok((ss / preds.len() as f64).sqrt())
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    Ok(preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: a.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(a.len(), b.len())?;
    pearson(&average_ranks(a), &average_ranks(b))
}

/// RMSE, MAE, and Pearson/Spearman correlation between predictions and labels.
pub fn point_metrics(preds: &[f64], labels: &[f64]) -> Result<PointMetrics, MetricsError> {
    Ok(PointMetrics {
        rmse: rmse(preds, labels)?,
        mae: mae(preds, labels)?,
        pearson: pearson(preds, labels)?,
        spearman: spearman(preds, labels)?,
    })
}

/// Mean negative log mixture density at the labels.
pub fn report_nll(preds: &[MixturePrediction], labels: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    Ok(-preds.iter().zip(labels).map(|(p, &y)| p.log_pdf(y)).sum::<f64>() / labels.len() as f64)
}
