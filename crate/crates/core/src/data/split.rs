use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Split};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub cal: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.1,
            cal: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    fn as_array(&self) -> [f64; 4] {
        [self.train, self.val, self.cal, self.test]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let f = self.as_array();
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::Invalid(format!("split fractions {f:?} must lie in [0, 1] and sum to 1")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` rows, ties to the earlier split.
    pub fn counts(&self, n: usize) -> [usize; 4] {
        let raw = self.as_array().map(|f| f * n as f64);
        let mut counts = raw.map(|r| (r + 1e-9).floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let ra = raw[a] - counts[a] as f64;
            let rb = raw[b] - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Random,
    ByGroup,
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

pub(crate) fn random_assignment(n: usize, fractions: &SplitFractions, rng: &mut Rng) -> Vec<Split> {
    let counts = fractions.counts(n);
    let perm = rng.permutation(n);
    let mut tags = vec![Split::Train; n];
    let mut cursor = 0;
    for (split, count) in Split::ALL.into_iter().zip(counts) {
        for &row in &perm[cursor..cursor + count] {
            tags[row] = split;
        }
        cursor += count;
    }
    tags
}

/// Tag every row of `ds`, replacing any existing tags.
///
/// `ByGroup` visits groups largest first (equal sizes in a seeded random
/// order) and gives each whole group to the split furthest below its target.
pub fn split_dataset(ds: &Dataset, fractions: &SplitFractions, mode: SplitMode, seed: u64) -> Result<SplitOutcome, DataError> {
    fractions.validate()?;
    let n = ds.len();
    let mut rng = Rng::new(seed).named("split");
    let mut warnings = Vec::new();
    let tags = match mode {
        SplitMode::Random => random_assignment(n, fractions, &mut rng),
        SplitMode::ByGroup => {
            let groups = ds
                .groups
                .as_ref()
                .ok_or_else(|| DataError::Invalid("by_group split requires group labels".into()))?;
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                members.entry(g.as_str()).or_default().push(i);
            }
            let mut order: Vec<(&str, Vec<usize>)> = members.into_iter().collect();
            rng.shuffle(&mut order);
            order.sort_by_key(|g| std::cmp::Reverse(g.1.len()));
            let targets = fractions.counts(n);
            let mut filled = [0usize; 4];
            let mut tags = vec![Split::Train; n];
            for (name, rows) in order {
                let k = (0..4)
                    .filter(|&k| targets[k] > 0)
                    .max_by(|&a, &b| {
                        let da = targets[a] as i64 - filled[a] as i64;
                        let db = targets[b] as i64 - filled[b] as i64;
                        da.cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                if rows.len() > targets[k] {
                    warnings.push(format!(
                        "group {name:?} has {} rows, more than the {} targeted for {}; assigned anyway",
                        rows.len(),
                        targets[k],
                        Split::ALL[k]
                    ));
                }
                filled[k] += rows.len();
                for r in rows {
                    tags[r] = Split::ALL[k];
                }
            }
            tags
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut dataset = ds.clone();
    dataset.split = Some(tags);
    Ok(SplitOutcome { dataset, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashMap};

    fn plain(n: usize) -> Dataset {
        Dataset::new(Matrix::zeros(n, 1), vec![0.0; n]).unwrap()
    }

    #[test]
    fn sixty_twenty_ten_ten_sizes() {
        let f = SplitFractions {
            train: 0.6,
            val: 0.2,
            cal: 0.1,
            test: 0.1,
        };
        let out = split_dataset(&plain(1000), &f, SplitMode::Random, 0).unwrap();
        assert_eq!(out.dataset.split_sizes(), [600, 200, 100, 100]);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let f = SplitFractions {
            train: 0.6,
            val: 0.2,
            cal: 0.1,
            test: 0.2,
        };
        assert!(split_dataset(&plain(10), &f, SplitMode::Random, 0).is_err());
    }

    #[test]
    fn seeded_assignment_is_reproducible() {
        let f = SplitFractions::default();
        let a = split_dataset(&plain(300), &f, SplitMode::Random, 5).unwrap();
        let b = split_dataset(&plain(300), &f, SplitMode::Random, 5).unwrap();
        let c = split_dataset(&plain(300), &f, SplitMode::Random, 6).unwrap();
        assert_eq!(a.dataset.split, b.dataset.split);
        assert_ne!(a.dataset.split, c.dataset.split);
    }

    fn grouped(sizes: &[usize]) -> Dataset {
        let mut ds = plain(sizes.iter().sum());
        ds.groups = Some(
            sizes
                .iter()
                .enumerate()
                .flat_map(|(g, &s)| std::iter::repeat_n(format!("g{g}"), s))
                .collect(),
        );
        ds
    }

    #[test]
    fn oversized_group_warns() {
        let out = split_dataset(&grouped(&[80, 5, 5, 5, 5]), &SplitFractions::default(), SplitMode::ByGroup, 0).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("g0"));
    }

    #[test]
    fn by_group_requires_labels() {
        assert!(split_dataset(&plain(10), &SplitFractions::default(), SplitMode::ByGroup, 0).is_err());
    }

    proptest! {
        #[test]
        fn groups_never_straddle_splits(sizes in prop::collection::vec(1usize..40, 1..30), seed in any::<u64>()) {
            let ds = grouped(&sizes);
            let out = split_dataset(&ds, &SplitFractions::default(), SplitMode::ByGroup, seed).unwrap();
            let tags = out.dataset.split.unwrap();
            let mut seen: HashMap<&String, BTreeSet<Split>> = HashMap::new();
            for (g, t) in ds.groups.as_ref().unwrap().iter().zip(&tags) {
                seen.entry(g).or_default().insert(*t);
            }
            prop_assert!(seen.values().all(|s| s.len() == 1));
        }

        #[test]
        fn counts_partition_rows(n in 0usize..5000, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let total = a + b + c + 0.5;
            let f = SplitFractions { train: a / total, val: b / total, cal: c / total, test: 0.5 / total };
            let counts = f.counts(n);
            prop_assert_eq!(counts.iter().sum::<usize>(), n);
            for (got, frac) in counts.iter().zip([f.train, f.val, f.cal, f.test]) {
                prop_assert!((*got as f64 - frac * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
