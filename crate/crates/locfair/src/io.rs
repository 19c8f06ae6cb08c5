//! Delimiter-separated input files.

use std::path::Path;

use locfair_core::data::{type_rows, Table, TypingReport};

use crate::error::{Error, Result};
use crate::schema::SchemaFile;

/// Raw header and records of a delimited file. Fields are trimmed and
/// records may have differing lengths (those are dropped at typing time).
pub fn read_records(
    path: &Path,
    delimiter: char,
    header: Option<&[String]>,
) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let delim = u8::try_from(delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Usage(format!("delimiter {delimiter:?} must be a single ASCII character")))?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(header.is_none())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = match header {
        Some(h) => h.to_vec(),
        None => reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect(),
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Reads and types a file according to its schema.
pub fn load_tabular(path: &Path, schema: &SchemaFile) -> Result<(Table, TypingReport)> {
    let (header, rows) = read_records(path, schema.schema.delimiter, schema.header.as_deref())?;
    Ok(type_rows(&header, &rows, &schema.schema)?)
}
