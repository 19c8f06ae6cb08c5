use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::schema::{ColumnKind, DatasetSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(String),
}

/// Raw value of a label or sensitive column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTarget {
    pub text: String,
    pub num: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub label: RawTarget,
    pub sensitive: RawTarget,
}

/// Rows typed according to a schema. Only feature columns are kept in
/// `cells`; label and sensitive values are carried separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub features: Vec<(String, ColumnKind)>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypingReport {
    pub total: usize,
    pub dropped: usize,
}

impl Table {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Table {
        Table {
            features: self.features.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Types raw string rows. Rows with a missing or unparseable required
/// value, or with the wrong number of fields, are dropped and counted.
pub fn type_rows(header: &[String], rows: &[Vec<String>], schema: &DatasetSchema) -> Result<(Table, TypingReport)> {
    schema.validate()?;
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let label_idx = find(&schema.label.column)
        .ok_or_else(|| Error::Schema(alloc::format!("label column `{}` not in header", schema.label.column)))?;
    let sens_idx = find(&schema.sensitive.column).ok_or_else(|| {
        Error::Schema(alloc::format!(
            "sensitive column `{}` not in header",
            schema.sensitive.column
        ))
    })?;
    for c in &schema.columns {
        if find(&c.name).is_none() {
            return Err(Error::Schema(alloc::format!(
                "schema column `{}` not in header",
                c.name
            )));
        }
    }
    let feature_cols: Vec<(usize, String, ColumnKind)> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (i, h.trim().to_string(), schema.kind_of(h.trim())))
        .filter(|(_, _, k)| *k != ColumnKind::Ignore)
        .collect();

    let mut out = Vec::with_capacity(rows.len());
    let mut report = TypingReport {
        total: rows.len(),
        dropped: 0,
    };
    'rows: for raw in rows {
        if raw.len() != header.len() {
            report.dropped += 1;
            continue;
        }
        let mut cells = Vec::with_capacity(feature_cols.len());
        for (i, _, kind) in &feature_cols {
            let v = raw[*i].trim();
            if schema.is_missing(v) {
                report.dropped += 1;
                continue 'rows;
            }
            match kind {
                ColumnKind::Continuous => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => cells.push(Cell::Num(x)),
                    _ => {
                        report.dropped += 1;
                        continue 'rows;
                    }
                },
                _ => cells.push(Cell::Cat(v.to_string())),
            }
        }
        let target = |idx: usize, numeric: bool| -> Option<RawTarget> {
            let text = raw[idx].trim();
            if schema.is_missing(text) {
                return None;
            }
            let num = text.parse::<f64>().ok().filter(|x| x.is_finite());
            if numeric && num.is_none() {
                return None;
            }
            Some(RawTarget {
                text: text.to_string(),
                num,
            })
        };
        let (Some(label), Some(sensitive)) = (
            target(label_idx, schema.label.rule.is_numeric()),
            target(sens_idx, schema.sensitive.rule.is_numeric()),
        ) else {
            report.dropped += 1;
            continue;
        };
        out.push(Row {
            cells,
            label,
            sensitive,
        });
    }
    if out.is_empty() {
        return Err(Error::Data("no usable rows after typing".into()));
    }
    Ok((
        Table {
            features: feature_cols.into_iter().map(|(_, n, k)| (n, k)).collect(),
            rows: out,
        },
        report,
    ))
}
