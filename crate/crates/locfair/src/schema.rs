//! Schema files: a [`DatasetSchema`] in TOML plus an optional `header`
//! list for files without a header row.

use std::path::Path;

use locfair_core::data::DatasetSchema;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    /// Column names for headerless files. When absent the first record
    /// of the file is the header.
    pub header: Option<Vec<String>>,
    pub schema: DatasetSchema,
}

const PRESETS: &[(&str, &str)] = &[
    ("adult", include_str!("presets/adult.toml")),
    ("compas", include_str!("presets/compas.toml")),
    ("bank", include_str!("presets/bank.toml")),
    ("communities-race", include_str!("presets/communities_race.toml")),
    ("communities-capital", include_str!("presets/communities_capital.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<SchemaFile> {
    let src = preset_source(name).ok_or_else(|| {
        let known: Vec<&str> = preset_names().collect();
        Error::Usage(format!("unknown dataset preset `{name}` (known: {})", known.join(", ")))
    })?;
    parse_schema(src, &format!("preset {name}"))
}

pub fn parse_schema(src: &str, what: &str) -> Result<SchemaFile> {
    let mut table: toml::Table = toml::from_str(src).map_err(|source| Error::TomlRead {
        what: what.to_string(),
        source,
    })?;
    let header = match table.remove("header") {
        None => None,
        Some(v) => Some(v.try_into::<Vec<String>>().map_err(|source| Error::TomlRead {
            what: format!("{what}: header"),
            source,
        })?),
    };
    let schema: DatasetSchema = table.try_into().map_err(|source| Error::TomlRead {
        what: what.to_string(),
        source,
    })?;
    schema.validate()?;
    Ok(SchemaFile { header, schema })
}

pub fn load_schema(path: &Path) -> Result<SchemaFile> {
    let src = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_schema(&src, &path.display().to_string())
}
