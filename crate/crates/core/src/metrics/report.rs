use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    cwc, default_grid, groupwise_picp, mpiw_nmpiw, picp, point_metrics, sparsification, ssc, CwcConfig,
    GroupCoverageTable, MetricsError, SparsificationCurve, SscBin,
};
use crate::conformal::PredictionInterval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Miscoverage level; the CWC nominal level is `1 − alpha`.
    pub alpha: f64,
    pub etas: Vec<f64>,
    pub primary_eta: f64,
    pub ssc_bins: Vec<usize>,
    pub sparsification_grid: Vec<f64>,
    pub group_min_n: usize,
    pub group_top_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            etas: vec![10.0, 50.0, 100.0],
            primary_eta: 50.0,
            ssc_bins: vec![3, 5, 10],
            sparsification_grid: default_grid(),
            group_min_n: 10,
            group_top_k: 15,
        }
    }
}

/// Scalar summary for one method on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub alpha: f64,
    pub n_test: usize,
    pub picp: f64,
    #[serde(with = "crate::serde_f64")]
    pub mpiw: f64,
    #[serde(with = "crate::serde_f64")]
    pub nmpiw: f64,
    /// CWC at the primary η.
    #[serde(with = "crate::serde_f64")]
    pub cwc: f64,
    pub cwc_primary_eta: f64,
    /// CWC keyed by η.
    #[serde(with = "crate::serde_f64::map")]
    pub cwc_by_eta: BTreeMap<String, f64>,
    pub ause: f64,
    /// Per-bin coverage keyed by bin count; empty when SSC was refused.
    pub ssc: BTreeMap<usize, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ssc_note: Option<String>,
    pub rmse: f64,
    pub mae: f64,
    #[serde(with = "crate::serde_f64::option")]
    pub pearson: Option<f64>,
    #[serde(with = "crate::serde_f64::option")]
    pub spearman: Option<f64>,
    #[serde(with = "crate::serde_f64::option")]
    pub nll: Option<f64>,
}

impl MetricsReport {
    /// Named scalar fields, for aggregation across runs.
    pub fn scalars(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("picp".into(), self.picp);
        m.insert("mpiw".into(), self.mpiw);
        m.insert("nmpiw".into(), self.nmpiw);
        m.insert("cwc".into(), self.cwc);
        for (eta, v) in &self.cwc_by_eta {
            m.insert(format!("cwc_eta{eta}"), *v);
        }
        m.insert("ause".into(), self.ause);
        m.insert("rmse".into(), self.rmse);
        m.insert("mae".into(), self.mae);
        for (k, v) in [("pearson", self.pearson), ("spearman", self.spearman), ("nll", self.nll)] {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        }
        m
    }
}

/// Report plus the curve data behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodEvaluation {
    pub report: MetricsReport,
    pub sparsification: SparsificationCurve,
    pub ssc: BTreeMap<usize, Vec<SscBin>>,
    pub groups: Option<GroupCoverageTable>,
}

pub(crate) fn eta_key(eta: f64) -> String {
    format!("{eta}")
}

/// Computes every metric for one method. The sparsification ordering uses
/// interval width; `nll` is passed through when the method has a density.
pub fn evaluate_method(
    method: &str,
    intervals: &[PredictionInterval],
    labels: &[f64],
    groups: Option<&[String]>,
    nll: Option<f64>,
    cfg: &EvalConfig,
) -> Result<MethodEvaluation, MetricsError> {
    let coverage = picp(intervals, labels)?;
    let (mpiw, nmpiw) = mpiw_nmpiw(intervals, labels)?;
    let mu = 1.0 - cfg.alpha;
    let cwc_by_eta: BTreeMap<String, f64> = cfg
        .etas
        .iter()
        .map(|&eta| (eta_key(eta), cwc(coverage, nmpiw, CwcConfig { eta, mu })))
        .collect();
    let primary = cwc(coverage, nmpiw, CwcConfig { eta: cfg.primary_eta, mu });

    let centers: Vec<f64> = intervals.iter().map(|iv| iv.center).collect();
    let residuals: Vec<f64> = centers.iter().zip(labels).map(|(c, y)| y - c).collect();
    let widths: Vec<f64> = intervals.iter().map(|iv| iv.width).collect();
    let curve = sparsification(&widths, &residuals, &cfg.sparsification_grid)?;

    let mut ssc_bins = BTreeMap::new();
    let mut ssc_note = None;
    for &j in &cfg.ssc_bins {
        match ssc(intervals, labels, j) {
            Ok(b) => {
                ssc_bins.insert(j, b);
            }
            Err(e @ (MetricsError::ConstantWidth | MetricsError::InfiniteIntervals(_))) => {
                ssc_note = Some(e.to_string());
                ssc_bins.clear();
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let point = point_metrics(&centers, labels);
    let (rmse, mae) = (super::rmse(&centers, labels)?, super::mae(&centers, labels)?);
    let (pearson, spearman) = match point {
        Ok(p) => (Some(p.pearson), Some(p.spearman)),
        Err(MetricsError::ZeroVariance) => (None, None),
        Err(e) => return Err(e),
    };

    let groups = groups
        .map(|g| groupwise_picp(intervals, labels, g, cfg.group_min_n, cfg.group_top_k))
        .transpose()?;

    let report = MetricsReport {
        method: method.to_string(),
        alpha: cfg.alpha,
        n_test: labels.len(),
        picp: coverage,
        mpiw,
        nmpiw,
        cwc: primary,
        cwc_primary_eta: cfg.primary_eta,
        cwc_by_eta,
        ause: curve.ause,
        ssc: ssc_bins
            .iter()
            .map(|(j, b)| (*j, b.iter().map(|x| x.coverage).collect()))
            .collect(),
        ssc_note,
        rmse,
        mae,
        pearson,
        spearman,
        nll,
    };
    Ok(MethodEvaluation {
        report,
        sparsification: curve,
        ssc: ssc_bins,
        groups,
    })
}

/// Columns: `fraction,model_rmse,oracle_rmse,sparsification_error`.
pub fn write_sparsification_csv(path: &Path, curve: &SparsificationCurve) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fraction", "model_rmse", "oracle_rmse", "sparsification_error"])?;
    for ((f, m), o) in curve.fractions.iter().zip(&curve.model_rmse).zip(&curve.oracle_rmse) {
        w.write_record([f.to_string(), m.to_string(), o.to_string(), (m - o).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `bin,count,covered,coverage,min_width,max_width`.
pub fn write_ssc_csv(path: &Path, bins: &[SscBin]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin", "count", "covered", "coverage", "min_width", "max_width"])?;
    for b in bins {
        w.write_record([
            b.bin.to_string(),
            b.count.to_string(),
            b.covered.to_string(),
            b.coverage.to_string(),
            b.min_width.to_string(),
            b.max_width.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `method,table,rank,group,n,picp` where `table` is one of
/// `all`, `most_frequent`, `least_frequent`.
pub fn write_group_csv(path: &Path, tables: &[(String, GroupCoverageTable)]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "table", "rank", "group", "n", "picp"])?;
    for (method, t) in tables {
        for (name, rows) in [
            ("all", &t.groups),
            ("most_frequent", &t.most_frequent),
            ("least_frequent", &t.least_frequent),
        ] {
            for (rank, g) in rows.iter().enumerate() {
                w.write_record([
                    method.clone(),
                    name.to_string(),
                    rank.to_string(),
                    g.group.clone(),
                    g.n.to_string(),
                    g.picp.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn fixture(constant: bool) -> (Vec<PredictionInterval>, Vec<f64>) {
        let mut rng = Rng::new(1);
        let mut ivs = Vec::new();
        let mut y = Vec::new();
        for _ in 0..200 {
            let s = if constant { 1.0 } else { rng.uniform_range(0.2, 2.0) };
            let c = rng.normal();
            ivs.push(PredictionInterval::symmetric(c, 1.645 * s, s));
            y.push(c + s * rng.normal());
        }
        (ivs, y)
    }

    #[test]
    fn report_has_all_fields() {
        let (ivs, y) = fixture(false);
        let ev = evaluate_method("m", &ivs, &y, None, Some(1.0), &EvalConfig::default()).unwrap();
        let r = &ev.report;
        assert_eq!(r.n_test, 200);
        assert_eq!(r.cwc_by_eta.len(), 3);
        assert_eq!(r.ssc.keys().copied().collect::<Vec<_>>(), vec![3, 5, 10]);
        assert!(r.ssc_note.is_none());
        assert!(r.ause >= 0.0);
        assert_eq!(r.cwc, r.cwc_by_eta["50"]);
        let json = serde_json::to_string(r).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, r);
    }

    #[test]
    fn constant_width_method_skips_ssc_with_note() {
        let (ivs, y) = fixture(true);
        let ev = evaluate_method("classical_cp", &ivs, &y, None, None, &EvalConfig::default()).unwrap();
        assert!(ev.report.ssc.is_empty());
        assert_eq!(
            ev.report.ssc_note.as_deref(),
            Some("constant-width intervals making SSC uninformative")
        );
    }

    #[test]
    fn infinite_intervals_serialize() {
        let ivs = vec![PredictionInterval::symmetric(0.0, f64::INFINITY, 1.0); 4];
        let ev = evaluate_method("inf", &ivs, &[0.0, 1.0, 2.0, 3.0], None, None, &EvalConfig::default()).unwrap();
        assert_eq!(ev.report.picp, 1.0);
        assert!(ev.report.mpiw.is_infinite());
        let json = serde_json::to_string(&ev.report).unwrap();
        assert!(json.contains(r#""mpiw":"inf""#));
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let (ivs, y) = fixture(false);
        let ev = evaluate_method("m", &ivs, &y, None, None, &EvalConfig::default()).unwrap();
        let p = dir.path().join("s.csv");
        write_sparsification_csv(&p, &ev.sparsification).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("fraction,model_rmse,oracle_rmse,sparsification_error\n"));
        assert_eq!(text.lines().count(), 21);
        let p = dir.path().join("b.csv");
        write_ssc_csv(&p, &ev.ssc[&5]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 6);
    }
}
