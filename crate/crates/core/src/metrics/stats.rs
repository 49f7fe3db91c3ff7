use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::point::{average_ranks, pearson, spearman};
use super::{check_lengths, MetricsError};

/// Kendall's tau-b (tie-corrected) in O(n log n): sort by (a, b), then count
/// the swaps a merge sort on `b` performs.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(a.len(), b.len())?;
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::TooFew { need: 2, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let mut ties_a = 0u64;
    let mut ties_joint = 0u64;
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (p, q) = (w[0], w[1]);
        if a[p] == a[q] {
            run_a += 1;
            if b[p] == b[q] {
                run_ab += 1;
            } else {
                ties_joint += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_joint += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_joint += pairs(run_ab);

    let mut ys: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let swaps = merge_count(&mut ys);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let total = pairs(n as u64);
    let denom = ((total - ties_a) as f64 * (total - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let numer = total as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Sorts ascending, returning the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            count += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Two-sided Welch's t test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::TooFew { need: 2, got: s.len() });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|_| MetricsError::ZeroVariance)?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TestResult { statistic: t, p_value: p })
}

/// Two-sided Mann–Whitney U test: normal approximation with tie correction
/// and a 0.5 continuity correction. The statistic is U for `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&combined);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;

    let mut sorted = combined.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return Err(MetricsError::ZeroVariance);
    }
    let centered = ((u1 - n1 * n2 / 2.0).abs() - 0.5).max(0.0);
    let z = centered / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * normal.cdf(-z)).min(1.0);
    Ok(TestResult { statistic: u1, p_value: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisentangleStats {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub welch: TestResult,
    pub mann_whitney: TestResult,
}

/// How related the aleatoric and epistemic signals are: three correlation
/// coefficients plus two-sample location tests.
pub fn disentangle_stats(aleatoric: &[f64], epistemic: &[f64]) -> Result<DisentangleStats, MetricsError> {
    check_lengths(aleatoric.len(), epistemic.len())?;
    if aleatoric.len() < 3 {
        return Err(MetricsError::TooFew { need: 3, got: aleatoric.len() });
    }
    Ok(DisentangleStats {
        pearson: pearson(aleatoric, epistemic)?,
        spearman: spearman(aleatoric, epistemic)?,
        kendall: kendall_tau_b(aleatoric, epistemic)?,
        welch: welch_t_test(aleatoric, epistemic)?,
        mann_whitney: mann_whitney_u(aleatoric, epistemic)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn sign(x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// O(n²) pair counting.
    fn brute_tau_b(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let (mut s, mut ta, mut tb, mut pairs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let (da, db) = (sign(a[i] - a[j]), sign(b[i] - b[j]));
                s += da * db;
                pairs += 1.0;
                if da == 0.0 {
                    ta += 1.0;
                }
                if db == 0.0 {
                    tb += 1.0;
                }
            }
        }
        s / ((pairs - ta) * (pairs - tb)).sqrt()
    }

    #[test]
    fn kendall_eight_point_fixture() {
        let a = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 5.0, 6.0];
        let b = [2.0, 1.0, 3.0, 3.0, 6.0, 5.0, 5.0, 4.0];
        assert_eq!(kendall_tau_b(&a, &b).unwrap(), brute_tau_b(&a, &b));
    }

    #[test]
    fn identical_signals_correlate_perfectly() {
        let a = [0.3, 1.2, 0.8, 2.2, 0.1];
        let s = disentangle_stats(&a, &a).unwrap();
        assert!((s.pearson - 1.0).abs() < 1e-15);
        assert!((s.spearman - 1.0).abs() < 1e-15);
        assert!((s.kendall - 1.0).abs() < 1e-15);
        assert_eq!(s.welch.p_value, 1.0);
        assert_eq!(s.mann_whitney.p_value, 1.0);
    }

    #[test]
    fn independent_normals_are_uncorrelated() {
        let mut rng = Rng::new(2024);
        let a: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let s = disentangle_stats(&a, &b).unwrap();
        for r in [s.pearson, s.spearman, s.kendall] {
            assert!(r.abs() < 0.03, "{r}");
        }
    }

    #[test]
    fn shifted_samples_are_detected() {
        let mut rng = Rng::new(5);
        let a: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..200).map(|_| 2.0 + rng.normal()).collect();
        assert!(welch_t_test(&a, &b).unwrap().p_value < 1e-6);
        assert!(mann_whitney_u(&a, &b).unwrap().p_value < 1e-6);
    }

    #[test]
    fn welch_matches_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0];
        let r = welch_t_test(&a, &b).unwrap();
        // means 2.5 and 4; variances 5/3 and 4
        let se = (5.0 / 12.0 + 4.0 / 3.0f64).sqrt();
        assert!((r.statistic - (-1.5 / se)).abs() < 1e-12);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn constant_input_is_error() {
        assert!(disentangle_stats(&[1.0; 5], &[0.0, 1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(kendall_tau_b(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(mann_whitney_u(&[2.0; 3], &[2.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn kendall_matches_pair_counting(seed in 0u64..2000, n in 3usize..50) {
            let mut rng = Rng::new(seed);
            // coarse values force ties
            let a: Vec<f64> = (0..n).map(|_| rng.below(6) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.below(6) as f64).collect();
            match kendall_tau_b(&a, &b) {
                Ok(t) => {
                    let brute = brute_tau_b(&a, &b);
                    prop_assert!((t - brute).abs() < 1e-12, "{} vs {}", t, brute);
                    prop_assert!((-1.0..=1.0).contains(&t));
                }
                Err(_) => prop_assert!(a.iter().all(|&x| x == a[0]) || b.iter().all(|&x| x == b[0])),
            }
        }

        #[test]
        fn correlations_bounded(seed in 0u64..500) {
            let mut rng = Rng::new(seed);
            let a: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.normal()).collect();
            let s = disentangle_stats(&a, &b).unwrap();
            for r in [s.pearson, s.spearman, s.kendall] {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
