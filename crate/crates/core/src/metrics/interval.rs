use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricsError};
use crate::conformal::PredictionInterval;

/// Fraction of labels inside their interval, endpoints included.
/// Infinite intervals cover everything.
pub fn picp(intervals: &[PredictionInterval], labels: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(intervals.len(), labels.len())?;
    let covered = intervals.iter().zip(labels).filter(|(iv, &y)| iv.contains(y)).count();
    Ok(covered as f64 / labels.len() as f64)
}

/// Mean width, and mean width normalized by the label range of `labels`.
/// Both are `+∞` if any interval is infinite.
pub fn mpiw_nmpiw(intervals: &[PredictionInterval], labels: &[f64]) -> Result<(f64, f64), MetricsError> {
    check_lengths(intervals.len(), labels.len())?;
    let (lo, hi) = labels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(MetricsError::DegenerateRange(lo));
    }
    if intervals.iter().any(PredictionInterval::is_infinite) {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let n = intervals.len() as f64;
    let mpiw = intervals.iter().map(|iv| iv.width).sum::<f64>() / n;
    let nmpiw = intervals.iter().map(|iv| iv.width / range).sum::<f64>() / n;
    Ok((mpiw, nmpiw))
}

/// Penalty coefficient and nominal coverage for the coverage–width criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwcConfig {
    pub eta: f64,
    pub mu: f64,
}

impl Default for CwcConfig {
    fn default() -> Self {
        Self { eta: 50.0, mu: 0.9 }
    }
}

/// `NMPIW·(1 + γ·e^{−η(PICP−μ)})` with `γ = 0` iff `PICP ≥ μ`, so that
/// adequate coverage reduces the criterion to NMPIW exactly.
pub fn cwc(picp: f64, nmpiw: f64, cfg: CwcConfig) -> f64 {
    if picp >= cfg.mu {
        nmpiw
    } else {
        nmpiw * (1.0 + (-cfg.eta * (picp - cfg.mu)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SscBin {
    pub bin: usize,
    pub count: usize,
    pub covered: usize,
    pub coverage: f64,
    pub min_width: f64,
    pub max_width: f64,
}

/// Size-stratified coverage: sort by width (ties by index), split into
/// `bins` equal-count bins with the remainder going to the last bins, and
/// report coverage per bin from narrowest to widest.
pub fn ssc(intervals: &[PredictionInterval], labels: &[f64], bins: usize) -> Result<Vec<SscBin>, MetricsError> {
    check_lengths(intervals.len(), labels.len())?;
    let n = labels.len();
    if bins < 2 || n < bins {
        return Err(MetricsError::InvalidBins { bins, n });
    }
    if intervals.iter().any(PredictionInterval::is_infinite) {
        return Err(MetricsError::InfiniteIntervals("SSC needs finite widths"));
    }
    let w0 = intervals[0].width;
    if intervals.iter().all(|iv| iv.width == w0) {
        return Err(MetricsError::ConstantWidth);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| intervals[a].width.total_cmp(&intervals[b].width).then(a.cmp(&b)));
    let base = n / bins;
    let extra = n % bins;
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 0..bins {
        let size = base + usize::from(b >= bins - extra);
        let members = &order[start..start + size];
        let covered = members.iter().filter(|&&i| intervals[i].contains(labels[i])).count();
        out.push(SscBin {
            bin: b,
            count: size,
            covered,
            coverage: covered as f64 / size as f64,
            min_width: intervals[members[0]].width,
            max_width: intervals[members[size - 1]].width,
        });
        start += size;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCoverage {
    pub group: String,
    pub n: usize,
    pub picp: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupCoverageTable {
    /// Every group with at least `min_n` members, largest first (ties by name).
    pub groups: Vec<GroupCoverage>,
    pub most_frequent: Vec<GroupCoverage>,
    /// Smallest qualifying groups, smallest first.
    pub least_frequent: Vec<GroupCoverage>,
    pub warnings: Vec<String>,
}

/// Coverage per group label, restricted to groups with at least `min_n`
/// members.
pub fn groupwise_picp(
    intervals: &[PredictionInterval],
    labels: &[f64],
    groups: &[String],
    min_n: usize,
    top_k: usize,
) -> Result<GroupCoverageTable, MetricsError> {
    check_lengths(intervals.len(), labels.len())?;
    check_lengths(intervals.len(), groups.len())?;
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ((iv, &y), g) in intervals.iter().zip(labels).zip(groups) {
        let e = tally.entry(g.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(iv.contains(y));
    }
    let mut qualifying: Vec<GroupCoverage> = tally
        .into_iter()
        .filter(|(_, (n, _))| *n >= min_n)
        .map(|(g, (n, c))| GroupCoverage {
            group: g.to_string(),
            n,
            picp: c as f64 / n as f64,
        })
        .collect();
    let mut table = GroupCoverageTable::default();
    if qualifying.is_empty() {
        let msg = format!("no group has at least {min_n} members");
        log::warn!("{msg}");
        table.warnings.push(msg);
        return Ok(table);
    }
    qualifying.sort_by(|a, b| b.n.cmp(&a.n).then_with(|| a.group.cmp(&b.group)));
    table.most_frequent = qualifying.iter().take(top_k).cloned().collect();
    table.least_frequent = qualifying.iter().rev().take(top_k).cloned().collect();
    table.groups = qualifying;
    Ok(table)
}
