//! Effective run configuration and per-fold data preparation.

use std::path::PathBuf;

use locfair_core::data::{
    encode, fit_encoder, gen_synthetic, kfold, split, DatasetSchema, EncodeReport, EncodedDataset, EncoderMeta,
    SyntheticConfig, Table, TypingReport,
};
use locfair_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::load_tabular;
use crate::schema::SchemaFile;

/// Where the rows come from. Tabular specs carry the resolved schema so
/// a config file is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticConfig),
    Tabular {
        csv: PathBuf,
        /// Held-out share when `folds == 1`.
        test_fraction: f64,
        header: Option<Vec<String>>,
        schema: DatasetSchema,
    },
}

impl DatasetSpec {
    pub fn tabular(csv: PathBuf, schema: SchemaFile) -> Self {
        DatasetSpec::Tabular {
            csv,
            test_fraction: 0.2,
            header: schema.header,
            schema: schema.schema,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Synthetic(_) => "synthetic",
            DatasetSpec::Tabular { schema, .. } => &schema.name,
        }
    }

    fn schema_file(&self) -> Option<SchemaFile> {
        match self {
            DatasetSpec::Synthetic(_) => None,
            DatasetSpec::Tabular { header, schema, .. } => Some(SchemaFile {
                header: header.clone(),
                schema: schema.clone(),
            }),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Folds for tabular data, independent seeds for synthetic data.
    pub folds: usize,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::Usage("--folds must be >= 1".into()));
        }
        self.train.validate()?;
        match &self.dataset {
            DatasetSpec::Synthetic(s) => s.validate()?,
            DatasetSpec::Tabular {
                test_fraction, schema, ..
            } => {
                schema.validate()?;
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::Usage("test fraction must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    /// Training config of one fold: the seed is offset by the fold index.
    pub fn fold_train(&self, fold: usize) -> TrainConfig {
        TrainConfig {
            seed: self.train.seed.wrapping_add(fold as u64),
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|source| Error::TomlWrite { what: "config", source })
    }
}

/// Rows loaded once and shared by every fold of a run.
#[derive(Debug, Clone)]
pub enum Source {
    Synthetic(SyntheticConfig),
    Tabular {
        table: Table,
        typing: TypingReport,
        test_fraction: f64,
        schema: DatasetSchema,
    },
}

impl Source {
    pub fn load(spec: &DatasetSpec) -> Result<Self> {
        match spec {
            DatasetSpec::Synthetic(s) => Ok(Source::Synthetic(s.clone())),
            DatasetSpec::Tabular {
                csv,
                test_fraction,
                schema,
                ..
            } => {
                let file = spec.schema_file().expect("tabular spec");
                let (table, typing) = load_tabular(csv, &file)?;
                Ok(Source::Tabular {
                    table,
                    typing,
                    test_fraction: *test_fraction,
                    schema: schema.clone(),
                })
            }
        }
    }

    pub fn typing(&self) -> Option<TypingReport> {
        match self {
            Source::Synthetic(_) => None,
            Source::Tabular { typing, .. } => Some(*typing),
        }
    }

    /// Train/test data of one fold. Synthetic folds are independent draws
    /// with the data seed offset by the fold index; tabular folds come from
    /// k-fold splitting (or a single random split when `folds == 1`).
    pub fn fold(&self, folds: usize, fold: usize, seed: u64, meta: Option<&EncoderMeta>) -> Result<FoldData> {
        match self {
            Source::Synthetic(s) => {
                let cfg = SyntheticConfig {
                    seed: s.seed.wrapping_add(fold as u64),
                    ..s.clone()
                };
                let (train, test) = gen_synthetic(&cfg)?;
                Ok(FoldData {
                    train,
                    test,
                    encoder: None,
                    encode_report: EncodeReport::default(),
                })
            }
            Source::Tabular {
                table,
                test_fraction,
                schema,
                ..
            } => {
                let (train_idx, test_idx) = if folds == 1 {
                    split(table.len(), *test_fraction, seed)?
                } else {
                    kfold(table.len(), folds, seed)?.swap_remove(fold)
                };
                let train_t = table.subset(&train_idx);
                let test_t = table.subset(&test_idx);
                let meta = match meta {
                    Some(m) => m.clone(),
                    None => fit_encoder(&train_t, schema)?,
                };
                let (train, _) = encode(&train_t, &meta)?;
                let (test, encode_report) = encode(&test_t, &meta)?;
                Ok(FoldData {
                    train,
                    test,
                    encoder: Some(meta),
                    encode_report,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub encoder: Option<EncoderMeta>,
    /// Unseen categories and clamped values in the test split.
    pub encode_report: EncodeReport,
}
