use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Discrete,
    Continuous,
    #[default]
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Predicate deciding the positive side of a label or sensitive column.
///
/// Percentile rules are resolved to a plain threshold on the training
/// split when the encoder is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    OneOf {
        values: Vec<String>,
    },
    AtLeast {
        threshold: f64,
    },
    Above {
        threshold: f64,
    },
    Below {
        threshold: f64,
    },
    /// Inclusive on both ends.
    Between {
        low: f64,
        high: f64,
    },
    AbovePercentile {
        percentile: f64,
    },
    BelowPercentile {
        percentile: f64,
    },
}

impl Rule {
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Rule::OneOf { .. })
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self {
            Rule::OneOf { values } if values.is_empty() => {
                Err(Error::Schema(alloc::format!("{what}: one_of needs at least one value")))
            }
            Rule::Between { low, high } if low > high => {
                Err(Error::Schema(alloc::format!("{what}: between has low > high")))
            }
            Rule::AbovePercentile { percentile } | Rule::BelowPercentile { percentile }
                if !(0.0..=100.0).contains(percentile) =>
            {
                Err(Error::Schema(alloc::format!("{what}: percentile must lie in [0, 100]")))
            }
            _ => Ok(()),
        }
    }
}

/// A label or sensitive column with the rule selecting its positive side
/// (`y = +1` / `a = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub column: String,
    #[serde(flatten)]
    pub rule: Rule,
}

/// How continuous columns are normalized. Only min-max scaling is
/// implemented; `mode` is reserved for a mixture-mode encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousEncoding {
    #[default]
    MinMax,
    Mode,
}

fn default_missing() -> Vec<String> {
    vec!["?".to_string(), String::new(), "NA".to_string()]
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Cell values treated as missing (after trimming whitespace).
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
    pub label: TargetSpec,
    pub sensitive: TargetSpec,
    #[serde(default)]
    pub columns: Vec<ColumnSpec>,
    /// Kind of header columns not listed in `columns`.
    #[serde(default)]
    pub default_kind: ColumnKind,
    #[serde(default)]
    pub continuous_encoding: ContinuousEncoding,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        self.label.rule.validate("label")?;
        self.sensitive.rule.validate("sensitive")?;
        if self.label.column == self.sensitive.column {
            return Err(Error::Schema("label and sensitive column must differ".into()));
        }
        if self.continuous_encoding == ContinuousEncoding::Mode {
            return Err(Error::Schema(
                "continuous_encoding = \"mode\" is reserved and not implemented; use \"min_max\"".into(),
            ));
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(alloc::format!("column {} listed twice", c.name)));
            }
            if c.name == self.label.column && c.kind != ColumnKind::Ignore {
                return Err(Error::Schema(alloc::format!(
                    "label column {} cannot also be a feature",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Feature kind of a header column.
    pub fn kind_of(&self, column: &str) -> ColumnKind {
        if column == self.label.column {
            return ColumnKind::Ignore;
        }
        self.columns
            .iter()
            .find(|c| c.name == column)
            .map_or(self.default_kind, |c| c.kind)
    }

    pub fn is_missing(&self, cell: &str) -> bool {
        self.missing.iter().any(|m| m == cell)
    }
}
