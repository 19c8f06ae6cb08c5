use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, DatasetSchema, Rule};
use super::table::{Cell, RawTarget, Table};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature matrix with `{-1,+1}` labels and `{0,1}` sensitive attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub x: Matrix,
    pub y: Vec<i8>,
    pub a: Vec<u8>,
    /// One name per column of `x`; one-hot columns are `column=value`.
    pub feature_names: Vec<String>,
}

impl EncodedDataset {
    pub fn new(x: Matrix, y: Vec<i8>, a: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if y.len() != x.rows() || a.len() != x.rows() || feature_names.len() != x.cols() {
            return Err(Error::Shape {
                op: "EncodedDataset",
                lhs: x.shape(),
                rhs: (y.len(), a.len()),
            });
        }
        if y.iter().any(|&v| v != 1 && v != -1) || a.iter().any(|&v| v > 1) {
            return Err(Error::Data("labels must be ±1 and attributes 0/1".into()));
        }
        Ok(Self { x, y, a, feature_names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Row indices per sensitive group.
    pub fn group_indices(&self) -> [Vec<usize>; 2] {
        let mut g = [Vec::new(), Vec::new()];
        for (i, &a) in self.a.iter().enumerate() {
            g[a as usize].push(i);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnMeta {
    Discrete { name: String, categories: Vec<String> },
    Continuous { name: String, min: f64, max: f64 },
}

impl ColumnMeta {
    pub fn width(&self) -> usize {
        match self {
            ColumnMeta::Discrete { categories, .. } => categories.len(),
            ColumnMeta::Continuous { .. } => 1,
        }
    }
}

/// A rule with percentiles resolved against training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ResolvedRule {
    OneOf { values: Vec<String> },
    AtLeast { threshold: f64 },
    Above { threshold: f64 },
    Below { threshold: f64 },
    Between { low: f64, high: f64 },
}

impl ResolvedRule {
    pub fn holds(&self, v: &RawTarget) -> bool {
        match (self, v.num) {
            (ResolvedRule::OneOf { values }, _) => values.contains(&v.text),
            (ResolvedRule::AtLeast { threshold }, Some(x)) => x >= *threshold,
            (ResolvedRule::Above { threshold }, Some(x)) => x > *threshold,
            (ResolvedRule::Below { threshold }, Some(x)) => x < *threshold,
            (ResolvedRule::Between { low, high }, Some(x)) => *low <= x && x <= *high,
            (_, None) => false,
        }
    }
}

/// Frozen preprocessing state, fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderMeta {
    pub columns: Vec<ColumnMeta>,
    pub label: ResolvedRule,
    pub sensitive: ResolvedRule,
}

impl EncoderMeta {
    pub fn input_dim(&self) -> usize {
        self.columns.iter().map(ColumnMeta::width).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeReport {
    /// Discrete cells whose category was not seen at fit time.
    pub unseen_categories: usize,
    /// Continuous cells clamped into `[0, 1]`.
    pub clamped: usize,
}

/// Linear-interpolation percentile of `values` (`p` in percent).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

fn resolve(rule: &Rule, values: impl Iterator<Item = Option<f64>>, what: &str) -> Result<ResolvedRule> {
    Ok(match rule {
        Rule::OneOf { values } => ResolvedRule::OneOf { values: values.clone() },
        Rule::AtLeast { threshold } => ResolvedRule::AtLeast { threshold: *threshold },
        Rule::Above { threshold } => ResolvedRule::Above { threshold: *threshold },
        Rule::Below { threshold } => ResolvedRule::Below { threshold: *threshold },
        Rule::Between { low, high } => ResolvedRule::Between { low: *low, high: *high },
        Rule::AbovePercentile { percentile: p } | Rule::BelowPercentile { percentile: p } => {
            let nums: Vec<f64> = values.flatten().collect();
            let t = percentile(&nums, *p)
                .ok_or_else(|| Error::Data(alloc::format!("{what}: no numeric values for percentile")))?;
            if matches!(rule, Rule::AbovePercentile { .. }) {
                ResolvedRule::Above { threshold: t }
            } else {
                ResolvedRule::Below { threshold: t }
            }
        }
    })
}

/// Fits category lists, min/max ranges and percentile thresholds on a
/// training table.
pub fn fit_encoder(train: &Table, schema: &DatasetSchema) -> Result<EncoderMeta> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit encoder on an empty table".into()));
    }
    let mut columns = Vec::with_capacity(train.features.len());
    for (c, (name, kind)) in train.features.iter().enumerate() {
        match kind {
            ColumnKind::Discrete => {
                let cats: BTreeSet<String> = train
                    .rows
                    .iter()
                    .map(|r| match &r.cells[c] {
                        Cell::Cat(s) => s.clone(),
                        Cell::Num(x) => alloc::format!("{x}"),
                    })
                    .collect();
                columns.push(ColumnMeta::Discrete {
                    name: name.clone(),
                    categories: cats.into_iter().collect(),
                });
            }
            ColumnKind::Continuous => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for r in &train.rows {
                    if let Cell::Num(x) = r.cells[c] {
                        min = min.min(x);
                        max = max.max(x);
                    }
                }
                columns.push(ColumnMeta::Continuous {
                    name: name.clone(),
                    min,
                    max,
                });
            }
            ColumnKind::Ignore => {}
        }
    }
    let label = resolve(&schema.label.rule, train.rows.iter().map(|r| r.label.num), "label")?;
    let sensitive = resolve(
        &schema.sensitive.rule,
        train.rows.iter().map(|r| r.sensitive.num),
        "sensitive",
    )?;
    Ok(EncoderMeta {
        columns,
        label,
        sensitive,
    })
}

/// Min-max scaling into `[0, 1]`, clamped. A constant column maps to 0.
#[inline]
pub fn min_max(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Encodes a table with frozen metadata.
pub fn encode(table: &Table, meta: &EncoderMeta) -> Result<(EncodedDataset, EncodeReport)> {
    if table.features.len() != meta.columns.len() {
        return Err(Error::Dimension {
            expected: meta.columns.len(),
            found: table.features.len(),
        });
    }
    let dim = meta.input_dim();
    let mut x = Matrix::zeros(table.len(), dim);
    let mut report = EncodeReport::default();
    for (i, row) in table.rows.iter().enumerate() {
        let out = x.row_mut(i);
        let mut off = 0;
        for (cell, col) in row.cells.iter().zip(&meta.columns) {
            match (col, cell) {
                (ColumnMeta::Discrete { categories, .. }, cell) => {
                    let key = match cell {
                        Cell::Cat(s) => s.clone(),
                        Cell::Num(v) => alloc::format!("{v}"),
                    };
                    match categories.binary_search(&key) {
                        Ok(k) => out[off + k] = 1.0,
                        Err(_) => report.unseen_categories += 1,
                    }
                }
                (ColumnMeta::Continuous { min, max, .. }, Cell::Num(v)) => {
                    let raw = if max > min { (v - min) / (max - min) } else { 0.0 };
                    if !(0.0..=1.0).contains(&raw) {
                        report.clamped += 1;
                    }
                    out[off] = min_max(*v, *min, *max);
                }
                (ColumnMeta::Continuous { name, .. }, Cell::Cat(_)) => {
                    return Err(Error::Data(alloc::format!("column {name} holds a non-numeric cell")));
                }
            }
            off += col.width();
        }
    }
    let y = table
        .rows
        .iter()
        .map(|r| if meta.label.holds(&r.label) { 1 } else { -1 })
        .collect();
    let a = table
        .rows
        .iter()
        .map(|r| u8::from(meta.sensitive.holds(&r.sensitive)))
        .collect();
    let mut names = Vec::with_capacity(dim);
    for col in &meta.columns {
        match col {
            ColumnMeta::Discrete { name, categories } => {
                names.extend(categories.iter().map(|c| alloc::format!("{name}={c}")));
            }
            ColumnMeta::Continuous { name, .. } => names.push(name.clone()),
        }
    }
    Ok((EncodedDataset::new(x, y, a, names)?, report))
}

/// Category index recovered from a one-hot group (argmax), or `None` for
/// an all-zero group.
pub fn decode_category(meta: &EncoderMeta, row: &[f64], column: usize) -> Option<String> {
    let off: usize = meta.columns[..column].iter().map(ColumnMeta::width).sum();
    match &meta.columns[column] {
        ColumnMeta::Discrete { categories, .. } => {
            let group = &row[off..off + categories.len()];
            let (k, &v) = group.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
            (v > 0.0).then(|| categories[k].clone())
        }
        ColumnMeta::Continuous { .. } => None,
    }
}
