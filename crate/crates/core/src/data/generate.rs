use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::split::{random_assignment, SplitFractions};
use super::{DataError, Dataset, Split};
use crate::numerics::{Matrix, Rng};

/// Noise standard deviation as a function of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseProfile {
    Constant { sigma: f64 },
    /// `base + slope·‖x‖/√d`.
    Linear { base: f64, slope: f64 },
    /// `low` where `x_0 < threshold`, `high` elsewhere.
    Step { low: f64, high: f64, threshold: f64 },
}

impl NoiseProfile {
    pub fn sigma(&self, x: &[f64]) -> f64 {
        match *self {
            NoiseProfile::Constant { sigma } => sigma,
            NoiseProfile::Linear { base, slope } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                base + slope * norm / (x.len() as f64).sqrt()
            }
            NoiseProfile::Step { low, high, threshold } => {
                if x[0] < threshold {
                    low
                } else {
                    high
                }
            }
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let ok = match *self {
            NoiseProfile::Constant { sigma } => sigma >= 0.0,
            NoiseProfile::Linear { base, slope } => base >= 0.0 && slope >= 0.0,
            NoiseProfile::Step { low, high, threshold } => low >= 0.0 && high >= 0.0 && threshold.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(DataError::Infeasible(format!("noise scales must be nonnegative: {self:?}")))
        }
    }
}

/// Named profiles with default parameters: `constant` (σ = 0.5),
/// `linear` (0.1 + 0.9‖x‖/√d), `step` (0.2 / 1.0 split at x₀ = 0).
impl FromStr for NoiseProfile {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(NoiseProfile::Constant { sigma: 0.5 }),
            "linear" => Ok(NoiseProfile::Linear { base: 0.1, slope: 0.9 }),
            "step" => Ok(NoiseProfile::Step {
                low: 0.2,
                high: 1.0,
                threshold: 0.0,
            }),
            other => Err(DataError::UnknownProfile(other.to_string())),
        }
    }
}

/// Noise-free regression target: a scaled sum of per-coordinate sinusoids
/// plus an affine term.
pub fn target_function(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let total: f64 = x
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let freq = 1.0 + 0.5 * (j % 3) as f64;
            (PI * freq * v).sin() + 0.5 * v
        })
        .sum();
    total / d.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroscedasticConfig {
    pub n: usize,
    pub d: usize,
    pub noise: NoiseProfile,
    pub seed: u64,
}

/// `x ~ U[−1, 1]^d`, `y = f(x) + σ(x)·ξ`. Rows are untagged.
pub fn gen_heteroscedastic(n: usize, d: usize, noise: &NoiseProfile, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 || d == 0 {
        return Err(DataError::Infeasible(format!("need n ≥ 1 and d ≥ 1, got n={n}, d={d}")));
    }
    noise.validate()?;
    let root = Rng::new(seed);
    let mut feat_rng = root.named("features");
    let mut noise_rng = root.named("noise");
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| feat_rng.uniform_range(-1.0, 1.0)).collect();
        let s = noise.sigma(&row);
        y.push(target_function(&row) + s * noise_rng.normal());
        sigma.push(s);
        data.extend(row);
    }
    let mut ds = Dataset::new(Matrix::from_vec(n, d, data).expect("sized above"), y)?;
    ds.sigma_true = Some(sigma);
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// Held-out clusters form the test split.
    Ood,
    /// Clusters ignored when splitting.
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterShiftConfig {
    pub n: usize,
    pub d: usize,
    pub n_clusters: usize,
    pub held_out: Vec<usize>,
    /// Standard deviation of cluster centers around the origin.
    pub center_spread: f64,
    /// Within-cluster standard deviation.
    pub cluster_std: f64,
    /// Extra distance pushing held-out centers away from the origin.
    pub far_offset: f64,
    pub noise_sigma: f64,
    pub mode: ShiftMode,
    pub seed: u64,
}

impl Default for ClusterShiftConfig {
    fn default() -> Self {
        Self {
            n: 3000,
            d: 4,
            n_clusters: 10,
            held_out: vec![8, 9],
            center_spread: 1.0,
            cluster_std: 0.25,
            far_offset: 0.0,
            noise_sigma: 0.2,
            mode: ShiftMode::Ood,
            seed: 0,
        }
    }
}

/// Gaussian clusters, one group label per cluster (`cluster_<c>`). Rows are
/// dealt to clusters round-robin. In OOD mode TEST holds exactly the held-out
/// clusters and the remaining rows are split 60:10:10 into TRAIN/VAL/CAL; in
/// i.i.d. mode all rows are split 60/10/10/20 at random.
pub fn gen_clustered_shift(cfg: &ClusterShiftConfig) -> Result<Dataset, DataError> {
    let ClusterShiftConfig {
        n,
        d,
        n_clusters,
        ref held_out,
        center_spread,
        cluster_std,
        far_offset,
        noise_sigma,
        mode,
        seed,
    } = *cfg;
    if d == 0 || n_clusters == 0 {
        return Err(DataError::Infeasible("need d ≥ 1 and at least one cluster".into()));
    }
    if n < n_clusters {
        return Err(DataError::Infeasible(format!("{n} rows cannot populate {n_clusters} clusters")));
    }
    let mut held = held_out.clone();
    held.sort_unstable();
    held.dedup();
    if held.is_empty() || held.len() >= n_clusters || held.iter().any(|&c| c >= n_clusters) {
        return Err(DataError::Infeasible(format!(
            "held-out clusters {held_out:?} must be a nonempty proper subset of 0..{n_clusters}"
        )));
    }
    if !(center_spread >= 0.0 && cluster_std >= 0.0 && far_offset >= 0.0 && noise_sigma >= 0.0) {
        return Err(DataError::Infeasible("scales must be nonnegative".into()));
    }
    let root = Rng::new(seed);
    let mut center_rng = root.named("centers");
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|c| {
            let mut center: Vec<f64> = (0..d).map(|_| center_spread * center_rng.normal()).collect();
            if held.binary_search(&c).is_ok() && far_offset > 0.0 {
                let dir: Vec<f64> = (0..d).map(|_| center_rng.normal()).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for (x, u) in center.iter_mut().zip(&dir) {
                    *x += far_offset * u / norm;
                }
            }
            center
        })
        .collect();
    let mut feat_rng = root.named("features");
    let mut noise_rng = root.named("noise");
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    let mut cluster_of = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_clusters;
        let row: Vec<f64> = centers[c].iter().map(|m| m + cluster_std * feat_rng.normal()).collect();
        y.push(target_function(&row) + noise_sigma * noise_rng.normal());
        groups.push(format!("cluster_{c}"));
        cluster_of.push(c);
        data.extend(row);
    }
    let mut ds = Dataset::new(Matrix::from_vec(n, d, data).expect("sized above"), y)?;
    ds.groups = Some(groups);
    ds.sigma_true = Some(vec![noise_sigma; n]);
    let mut split_rng = root.named("split");
    ds.split = Some(match mode {
        ShiftMode::Iid => random_assignment(n, &SplitFractions::default(), &mut split_rng),
        ShiftMode::Ood => {
            let in_dist: Vec<usize> = (0..n).filter(|&i| held.binary_search(&cluster_of[i]).is_err()).collect();
            let fractions = SplitFractions {
                train: 0.75,
                val: 0.125,
                cal: 0.125,
                test: 0.0,
            };
            let inner = random_assignment(in_dist.len(), &fractions, &mut split_rng);
            let mut tags = vec![Split::Test; n];
            for (&row, tag) in in_dist.iter().zip(inner) {
                tags[row] = tag;
            }
            tags
        }
    });
    Ok(ds)
}

/// Generator choice as stored in configs and dataset sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Heteroscedastic(HeteroscedasticConfig),
    ClusteredShift(ClusterShiftConfig),
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Dataset, DataError> {
        match self {
            GeneratorSpec::Heteroscedastic(c) => gen_heteroscedastic(c.n, c.d, &c.noise, c.seed),
            GeneratorSpec::ClusteredShift(c) => gen_clustered_shift(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn constant_noise_has_requested_scale() {
        let ds = gen_heteroscedastic(100_000, 3, &NoiseProfile::Constant { sigma: 0.5 }, 1).unwrap();
        let resid: Vec<f64> = ds
            .x
            .iter_rows()
            .zip(&ds.y)
            .map(|(x, y)| y - target_function(x))
            .collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.48..=0.52).contains(&sd), "{sd}");
    }

    #[test]
    fn zero_noise_is_deterministic_function() {
        let noise = NoiseProfile::Constant { sigma: 0.0 };
        let a = gen_heteroscedastic(50, 2, &noise, 3).unwrap();
        for (x, y) in a.x.iter_rows().zip(&a.y) {
            assert_eq!(*y, target_function(x));
        }
        assert_eq!(a, gen_heteroscedastic(50, 2, &noise, 3).unwrap());
    }

    #[test]
    fn same_seed_same_data() {
        let p: NoiseProfile = "linear".parse().unwrap();
        assert_eq!(gen_heteroscedastic(200, 4, &p, 9).unwrap(), gen_heteroscedastic(200, 4, &p, 9).unwrap());
        assert_ne!(gen_heteroscedastic(200, 4, &p, 9).unwrap(), gen_heteroscedastic(200, 4, &p, 10).unwrap());
    }

    #[test]
    fn step_profile_records_truth() {
        let p: NoiseProfile = "step".parse().unwrap();
        let ds = gen_heteroscedastic(500, 2, &p, 0).unwrap();
        let s = ds.sigma_true.as_ref().unwrap();
        for (x, &sig) in ds.x.iter_rows().zip(s) {
            assert_eq!(sig, if x[0] < 0.0 { 0.2 } else { 1.0 });
        }
    }

    #[test]
    fn unknown_profile_name() {
        assert!(matches!("wavy".parse::<NoiseProfile>(), Err(DataError::UnknownProfile(_))));
    }

    #[test]
    fn ood_test_groups_disjoint_from_training() {
        let ds = gen_clustered_shift(&ClusterShiftConfig::default()).unwrap();
        let g = ds.groups.as_ref().unwrap();
        let test: BTreeSet<&String> = ds.indices(Split::Test).iter().map(|&i| &g[i]).collect();
        for s in [Split::Train, Split::Val, Split::Cal] {
            let other: BTreeSet<&String> = ds.indices(s).iter().map(|&i| &g[i]).collect();
            assert!(test.is_disjoint(&other));
        }
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn iid_mode_split_fractions() {
        let cfg = ClusterShiftConfig {
            n: 1000,
            mode: ShiftMode::Iid,
            ..ClusterShiftConfig::default()
        };
        let ds = gen_clustered_shift(&cfg).unwrap();
        let [tr, va, ca, te] = ds.split_sizes();
        for (got, want) in [(tr, 600), (va, 100), (ca, 100), (te, 200)] {
            assert!(got.abs_diff(want) <= 1, "{got} vs {want}");
        }
    }

    #[test]
    fn infeasible_cluster_configs() {
        let bad = |f: &dyn Fn(&mut ClusterShiftConfig)| {
            let mut c = ClusterShiftConfig::default();
            f(&mut c);
            gen_clustered_shift(&c).is_err()
        };
        assert!(bad(&|c| c.n = 5));
        assert!(bad(&|c| c.held_out = vec![]));
        assert!(bad(&|c| c.held_out = (0..10).collect()));
        assert!(bad(&|c| c.held_out = vec![42]));
    }

    #[test]
    fn far_offset_moves_held_out_clusters() {
        let near = gen_clustered_shift(&ClusterShiftConfig::default()).unwrap();
        let far = gen_clustered_shift(&ClusterShiftConfig {
            far_offset: 5.0,
            ..ClusterShiftConfig::default()
        })
        .unwrap();
        let mean_norm = |ds: &Dataset| {
            let rows = ds.indices(Split::Test);
            rows.iter()
                .map(|&i| ds.x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .sum::<f64>()
                / rows.len() as f64
        };
        assert!(mean_norm(&far) > mean_norm(&near) + 2.0);
    }
}
