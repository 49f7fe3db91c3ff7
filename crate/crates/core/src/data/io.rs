use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::GeneratorSpec;
use super::split::{SplitFractions, SplitMode};
use super::{DataError, Dataset, Split};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Feature(usize),
    Target,
    Group,
    SigmaTrue,
    Split,
}

fn classify(name: &str) -> Option<Column> {
    match name {
        "target" => Some(Column::Target),
        "group" => Some(Column::Group),
        "sigma_true" => Some(Column::SigmaTrue),
        "split" => Some(Column::Split),
        _ => name
            .strip_prefix("feature_")
            .and_then(|j| j.parse().ok())
            .map(Column::Feature),
    }
}

/// Read a dataset with header `feature_0..feature_{d-1}, target` plus any
/// of `group`, `sigma_true`, `split`. Column order is free.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let header = reader.headers()?.clone();
    let header_err = |message: String| DataError::Parse { line: 1, message };
    if header.is_empty() {
        return Err(header_err("empty header".into()));
    }
    let mut columns = Vec::with_capacity(header.len());
    for name in header.iter() {
        let col = classify(name.trim()).ok_or_else(|| header_err(format!("unrecognized column {name:?}")))?;
        if columns.contains(&col) {
            return Err(header_err(format!("duplicate column {name:?}")));
        }
        columns.push(col);
    }
    if !columns.contains(&Column::Target) {
        return Err(header_err("missing target column".into()));
    }
    let d = columns.iter().filter(|c| matches!(c, Column::Feature(_))).count();
    if (0..d).any(|j| !columns.contains(&Column::Feature(j))) {
        return Err(header_err(format!("feature columns must be feature_0..feature_{}", d.saturating_sub(1))));
    }
    let has = |c: Column| columns.contains(&c);

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut groups = has(Column::Group).then(Vec::new);
    let mut sigma = has(Column::SigmaTrue).then(Vec::new);
    let mut split = has(Column::Split).then(Vec::new);
    let mut row = vec![0.0; d];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| DataError::Parse { line, message };
        if record.len() != columns.len() {
            return Err(err(format!("expected {} fields, found {}", columns.len(), record.len())));
        }
        let number = |field: &str, what: &str| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| err(format!("{what}: cannot parse {field:?} as a number")))
        };
        for (col, field) in columns.iter().zip(record.iter()) {
            match *col {
                Column::Feature(j) => row[j] = number(field, &format!("feature_{j}"))?,
                Column::Target => y.push(number(field, "target")?),
                Column::SigmaTrue => sigma.as_mut().expect("column present").push(number(field, "sigma_true")?),
                Column::Group => {
                    if field.is_empty() {
                        return Err(err("empty group label".into()));
                    }
                    groups.as_mut().expect("column present").push(field.to_string());
                }
                Column::Split => {
                    let tag: Split = field.trim().parse().map_err(err)?;
                    split.as_mut().expect("column present").push(tag);
                }
            }
        }
        x.extend_from_slice(&row);
    }
    let n = y.len();
    let mut ds = Dataset::new(Matrix::from_vec(n, d, x).expect("rows checked"), y)?;
    ds.groups = groups;
    ds.sigma_true = sigma;
    ds.split = split;
    ds.validate()?;
    Ok(ds)
}

// Debug formatting of f64 is the shortest string that parses back to the
// same bits, and stays compact for extreme exponents.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    ds.validate()?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path.as_ref())?));
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("feature_{j}")).collect();
    header.push("target".into());
    if ds.groups.is_some() {
        header.push("group".into());
    }
    if ds.sigma_true.is_some() {
        header.push("sigma_true".into());
    }
    if ds.split.is_some() {
        header.push("split".into());
    }
    writer.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..ds.len() {
        fields.clear();
        fields.extend(ds.x.row(i).iter().map(|&v| fmt_f64(v)));
        fields.push(fmt_f64(ds.y[i]));
        if let Some(g) = &ds.groups {
            fields.push(g[i].clone());
        }
        if let Some(s) = &ds.sigma_true {
            fields.push(fmt_f64(s[i]));
        }
        if let Some(s) = &ds.split {
            fields.push(s[i].to_string());
        }
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON sidecar describing where a CSV came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub split_mode: Option<SplitMode>,
    #[serde(default)]
    pub split_fractions: Option<SplitFractions>,
    #[serde(default)]
    pub split_seed: Option<u64>,
}

impl DatasetMeta {
    pub fn describe(ds: &Dataset) -> Self {
        Self {
            n: ds.len(),
            d: ds.dim(),
            generator: None,
            split_mode: None,
            split_fractions: None,
            split_seed: None,
        }
    }
}

pub fn write_meta(meta: &DatasetMeta, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut out, meta)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_meta(path: impl AsRef<Path>) -> Result<DatasetMeta, DataError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path.as_ref())?))?)
}
