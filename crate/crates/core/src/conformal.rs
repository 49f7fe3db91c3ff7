//! Split-conformal calibration with a per-sample difficulty scale.
//!
//! Calibration residuals are normalized by a scale `S(x)` (expert
//! disagreement, aleatoric scale, or the constant 1 for classical split
//! CP). The finite-sample conformal quantile of those scores then sizes
//! intervals `μ̂(x) ± q̂·S(x)` on new points.
//!
//! Quantile convention: `q̂` is the `k`-th smallest score with
//! `k = ⌈(1−α)(n+1)⌉`; when `k > n` the quantile is `+∞`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("empty calibration set")]
    Empty,

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("epsilon must be nonnegative and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("scale plus epsilon is zero at row {0}")]
    ZeroDenominator(usize),

    #[error("negative or non-finite scale {value} at row {row}")]
    InvalidScale { row: usize, value: f64 },

    #[error("non-finite residual at row {0}")]
    NonFinite(usize),

    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),

    #[error("unknown scale kind {0:?}")]
    UnknownKind(String),
}

/// Which difficulty signal normalizes the residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    Epistemic,
    Aleatoric,
    /// `S(x) = 1`: classical split CP.
    Constant,
}

impl ScaleKind {
    pub const ALL: [ScaleKind; 3] = [ScaleKind::Epistemic, ScaleKind::Aleatoric, ScaleKind::Constant];

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleKind::Epistemic => "epistemic",
            ScaleKind::Aleatoric => "aleatoric",
            ScaleKind::Constant => "constant",
        }
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScaleKind {
    type Err = CalibrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epistemic" => Ok(ScaleKind::Epistemic),
            "aleatoric" => Ok(ScaleKind::Aleatoric),
            "constant" => Ok(ScaleKind::Constant),
            other => Err(CalibrationError::UnknownKind(other.to_string())),
        }
    }
}

/// Everything needed to turn (center, scale) pairs into intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationResult {
    pub kind: ScaleKind,
    pub alpha: f64,
    pub epsilon: f64,
    pub n_cal: usize,
    #[serde(with = "crate::serde_f64")]
    pub q_hat: f64,
}

impl CalibrationResult {
    pub fn is_infinite(&self) -> bool {
        self.q_hat.is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    /// Scale value the half-width was built from.
    pub scale: f64,
}

impl PredictionInterval {
    /// Symmetric interval `center ± half_width`.
    pub fn symmetric(center: f64, half_width: f64, scale: f64) -> Self {
        if half_width.is_infinite() {
            return Self {
                center,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                width: f64::INFINITY,
                scale,
            };
        }
        Self {
            center,
            lower: center - half_width,
            upper: center + half_width,
            width: 2.0 * half_width,
            scale,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.width.is_infinite()
    }

    /// Endpoints count as covered.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// `|y − μ̂| / (S + ε)` per calibration row.
pub fn nonconformity_scores(
    labels: &[f64],
    centers: &[f64],
    scales: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>, CalibrationError> {
    if labels.len() != centers.len() {
        return Err(CalibrationError::Length(labels.len(), centers.len()));
    }
    if labels.len() != scales.len() {
        return Err(CalibrationError::Length(labels.len(), scales.len()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(CalibrationError::InvalidEpsilon(epsilon));
    }
    labels
        .iter()
        .zip(centers)
        .zip(scales)
        .enumerate()
        .map(|(row, ((&y, &c), &s))| {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CalibrationError::InvalidScale { row, value: s });
            }
            let denom = s + epsilon;
            if denom == 0.0 {
                return Err(CalibrationError::ZeroDenominator(row));
            }
            let r = (y - c).abs();
            if !r.is_finite() {
                return Err(CalibrationError::NonFinite(row));
            }
            Ok(r / denom)
        })
        .collect()
}

/// Rank of the order statistic used as the conformal quantile. May exceed
/// `n`, in which case the quantile is infinite.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let level = (1.0 - alpha) * (n as f64 + 1.0);
    // absorb representation error such as 0.9 * 10 = 9.000000000000002
    (level - 1e-9).ceil().max(1.0) as usize
}

/// Finite-sample conformal quantile of `scores`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64, CalibrationError> {
    if scores.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CalibrationError::InvalidAlpha(alpha));
    }
    if let Some(row) = scores.iter().position(|s| s.is_nan()) {
        return Err(CalibrationError::NonFinite(row));
    }
    let n = scores.len();
    let k = quantile_rank(n, alpha);
    if k > n {
        return Ok(f64::INFINITY);
    }
    let mut work = scores.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Scores the calibration rows and records the resulting quantile.
/// For [`ScaleKind::Constant`] the supplied scales are ignored.
pub fn calibrate(
    labels: &[f64],
    centers: &[f64],
    scales: &[f64],
    kind: ScaleKind,
    alpha: f64,
    epsilon: f64,
) -> Result<CalibrationResult, CalibrationError> {
    if labels.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let ones;
    let scales = if kind == ScaleKind::Constant {
        ones = vec![1.0; labels.len()];
        &ones
    } else {
        scales
    };
    let scores = nonconformity_scores(labels, centers, scales, epsilon)?;
    let q_hat = conformal_quantile(&scores, alpha)?;
    Ok(CalibrationResult {
        kind,
        alpha,
        epsilon,
        n_cal: labels.len(),
        q_hat,
    })
}

/// `μ̂ ± q̂·S` for each row. Constant-kind calibrations use `S = 1`.
pub fn build_intervals(
    calib: &CalibrationResult,
    centers: &[f64],
    scales: &[f64],
) -> Result<Vec<PredictionInterval>, CalibrationError> {
    if calib.kind != ScaleKind::Constant && centers.len() != scales.len() {
        return Err(CalibrationError::Length(centers.len(), scales.len()));
    }
    centers
        .iter()
        .enumerate()
        .map(|(row, &c)| {
            let s = if calib.kind == ScaleKind::Constant { 1.0 } else { scales[row] };
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CalibrationError::InvalidScale { row, value: s });
            }
            let half = if calib.q_hat.is_infinite() {
                f64::INFINITY
            } else {
                calib.q_hat * s
            };
            Ok(PredictionInterval::symmetric(c, half, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_scores_zero() {
        let s = nonconformity_scores(&[1.0], &[1.0], &[0.5], 1e-8).unwrap();
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn score_direct_evaluation() {
        let s = nonconformity_scores(&[3.0], &[1.0], &[1.0], 0.0).unwrap();
        assert_eq!(s, vec![2.0]);
    }

    #[test]
    fn doubling_scale_halves_scores() {
        let y = [1.0, -2.0, 0.5];
        let c = [0.0, 0.3, 0.1];
        let s = [0.5, 1.5, 2.0];
        let a = nonconformity_scores(&y, &c, &s, 0.0).unwrap();
        let s2: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let b = nonconformity_scores(&y, &c, &s2, 0.0).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert_eq!(*z, x / 2.0);
        }
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(
            nonconformity_scores(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 0.0], 0.0),
            Err(CalibrationError::ZeroDenominator(1))
        );
    }

    #[test]
    fn quantile_of_one_to_nine() {
        let scores: Vec<f64> = (1..=9).rev().map(f64::from).collect();
        assert_eq!(quantile_rank(9, 0.1), 9);
        assert_eq!(conformal_quantile(&scores, 0.1).unwrap(), 9.0);
    }

    #[test]
    fn small_calibration_set_gives_infinite_quantile() {
        assert_eq!(quantile_rank(5, 0.1), 6);
        assert_eq!(conformal_quantile(&[0.1, 0.2, 0.3, 0.4, 0.5], 0.1).unwrap(), f64::INFINITY);
        let c = calibrate(&[0.0; 5], &[0.0; 5], &[1.0; 5], ScaleKind::Constant, 0.1, 1e-8).unwrap();
        assert!(c.is_infinite());
        let iv = build_intervals(&c, &[1.0], &[]).unwrap();
        assert!(iv[0].is_infinite());
        assert!(iv[0].contains(1e300));
    }

    #[test]
    fn uniform_scores_quantile_near_nominal() {
        let mut rng = Rng::new(99);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let q = conformal_quantile(&scores, 0.1).unwrap();
        assert!((0.88..=0.92).contains(&q), "{q}");
    }

    #[test]
    fn empty_and_bad_alpha() {
        assert_eq!(conformal_quantile(&[], 0.1), Err(CalibrationError::Empty));
        assert_eq!(conformal_quantile(&[1.0], 1.0), Err(CalibrationError::InvalidAlpha(1.0)));
        assert_eq!(conformal_quantile(&[1.0], 0.0), Err(CalibrationError::InvalidAlpha(0.0)));
    }

    #[test]
    fn interval_direct_evaluation() {
        let c = CalibrationResult {
            kind: ScaleKind::Aleatoric,
            alpha: 0.1,
            epsilon: 1e-8,
            n_cal: 100,
            q_hat: 2.0,
        };
        let iv = build_intervals(&c, &[0.0, 4.0], &[1.5, 0.0]).unwrap();
        assert_eq!((iv[0].lower, iv[0].upper), (-3.0, 3.0));
        assert_eq!(iv[0].width, 6.0);
        // zero scale collapses to the point prediction
        assert_eq!((iv[1].lower, iv[1].upper, iv[1].width), (4.0, 4.0, 0.0));
    }

    #[test]
    fn constant_kind_has_constant_width() {
        let mut rng = Rng::new(3);
        let n = 200;
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let c = vec![0.0; n];
        let s: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.1, 3.0)).collect();
        let cal = calibrate(&y, &c, &s, ScaleKind::Constant, 0.1, 1e-8).unwrap();
        let iv = build_intervals(&cal, &y, &s).unwrap();
        let w0 = iv[0].width;
        assert!(iv.iter().all(|i| i.width == w0));
        assert!((w0 - 2.0 * cal.q_hat).abs() == 0.0);
    }

    #[test]
    fn unit_scales_reduce_to_classical() {
        let mut rng = Rng::new(4);
        let y: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..300).map(|_| 0.1 * rng.normal()).collect();
        let a = calibrate(&y, &c, &vec![1.0; 300], ScaleKind::Aleatoric, 0.1, 1e-8).unwrap();
        let b = calibrate(&y, &c, &[], ScaleKind::Constant, 0.1, 1e-8).unwrap();
        assert_eq!(a.q_hat, b.q_hat);
        assert_eq!(a.n_cal, b.n_cal);
    }

    /// y = c + S·ξ with heteroscedastic S; fresh calibration and test draws per seed.
    fn coverage_run(seed: u64, alpha: f64) -> f64 {
        let mut rng = Rng::new(seed);
        let mut draw = |n: usize| {
            let mut y = Vec::with_capacity(n);
            let mut c = Vec::with_capacity(n);
            let mut s = Vec::with_capacity(n);
            for _ in 0..n {
                let center = rng.normal();
                let scale = rng.uniform_range(0.2, 2.0);
                c.push(center);
                s.push(scale);
                y.push(center + scale * rng.normal());
            }
            (y, c, s)
        };
        let (yc, cc, sc) = draw(2000);
        let (yt, ct, st) = draw(2000);
        let cal = calibrate(&yc, &cc, &sc, ScaleKind::Aleatoric, alpha, 1e-8).unwrap();
        let iv = build_intervals(&cal, &ct, &st).unwrap();
        iv.iter().zip(&yt).filter(|(i, &y)| i.contains(y)).count() as f64 / yt.len() as f64
    }

    #[test]
    fn monte_carlo_coverage_at_nominal_levels() {
        let mean = |alpha| (0..50).map(|s| coverage_run(s, alpha)).sum::<f64>() / 50.0;
        let m90 = mean(0.1);
        assert!((0.885..=0.915).contains(&m90), "{m90}");
        let m50 = mean(0.5);
        assert!((m50 - 0.5).abs() <= 0.02, "{m50}");
    }

    #[test]
    fn calibration_json_uses_inf_sentinel() {
        let c = CalibrationResult {
            kind: ScaleKind::Epistemic,
            alpha: 0.1,
            epsilon: 1e-8,
            n_cal: 5,
            q_hat: f64::INFINITY,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains(r#""q_hat":"inf""#), "{s}");
        let back: CalibrationResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn quantile_monotone_in_level(scores in prop::collection::vec(0f64..10.0, 1..60), a1 in 0.01f64..0.99, a2 in 0.01f64..0.99) {
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            // smaller alpha = higher coverage level
            prop_assert!(conformal_quantile(&scores, lo).unwrap() >= conformal_quantile(&scores, hi).unwrap());
        }

        #[test]
        fn quantile_permutation_invariant(scores in prop::collection::vec(0f64..10.0, 1..60), seed in 0u64..500, alpha in 0.01f64..0.99) {
            let mut shuffled = scores.clone();
            Rng::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(conformal_quantile(&scores, alpha).unwrap(), conformal_quantile(&shuffled, alpha).unwrap());
        }

        #[test]
        fn infinite_exactly_when_level_exceeds_one(n in 1usize..200, alpha in 0.001f64..0.999) {
            let scores = vec![1.0; n];
            let q = conformal_quantile(&scores, alpha).unwrap();
            let level = (1.0 - alpha) * (1.0 + 1.0 / n as f64);
            // skip the knife edge where representation error decides
            prop_assume!((level - 1.0).abs() > 1e-9);
            prop_assert_eq!(q.is_infinite(), level > 1.0);
        }
    }
}
