//! CSV dataset loading and writing.
//!
//! Files are UTF-8 with one sample per row. With a header, the label column
//! is found by name and every other column is a feature in file order;
//! without one, the last column is the label. Labels are either numeric
//! (+1 / -1) or mapped from class strings via the schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, Sample};

/// How to interpret a dataset CSV file.
///
/// In serialized form the delimiter is the byte value (44 = comma,
/// 59 = semicolon, 9 = tab).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub delimiter: u8,
    /// Name of the label column when a header is present.
    pub label_column: String,
    /// Class-string to label mappings, tried before numeric parsing.
    pub label_mapping: Vec<(String, i32)>,
    pub has_header: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            delimiter: b',',
            label_column: "label".to_string(),
            label_mapping: Vec::new(),
            has_header: true,
        }
    }
}

impl CsvSchema {
    fn parse_label(&self, raw: &str) -> Result<i32> {
        for (name, label) in &self.label_mapping {
            if name == raw {
                return Ok(*label);
            }
        }
        match raw.trim().parse::<f64>() {
            Ok(v) if v == 1.0 => Ok(1),
            Ok(v) if v == -1.0 => Ok(-1),
            _ => Err(Error::Parse(format!(
                "label '{raw}' is neither mapped nor numeric +1/-1"
            ))),
        }
    }
}

/// Reads a labelled dataset, preserving row order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(false)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    parse_records(reader, schema)
}

/// Parses CSV text already in memory, with the same rules as [`load_csv`].
pub fn parse_csv_str(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(false)
        .from_reader(text.as_bytes());
    parse_records(reader, schema)
}

fn parse_records<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    schema: &CsvSchema,
) -> Result<Dataset> {
    let label_index = if schema.has_header {
        let headers = reader.headers().map_err(csv_error)?;
        headers
            .iter()
            .position(|h| h == schema.label_column)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "label column '{}' not found in header",
                    schema.label_column
                ))
            })?
    } else {
        usize::MAX // resolved per record: the last field
    };

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.is_empty() {
            continue;
        }
        let label_index = if schema.has_header { label_index } else { record.len() - 1 };
        let mut features = Vec::with_capacity(record.len() - 1);
        let mut label = None;
        for (col, field) in record.iter().enumerate() {
            if col == label_index {
                label = Some(schema.parse_label(field)?);
            } else {
                let value: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!(
                        "row {row}, column {col}: '{field}' is not a number"
                    ))
                })?;
                features.push(value);
            }
        }
        let label = label.ok_or_else(|| {
            Error::Parse(format!("row {row} has no label field"))
        })?;
        samples.push(Sample::new(features, label));
    }
    Dataset::new(samples)
}

/// Writes a dataset as `f0,...,f{d-1},<label column>` with numeric labels.
///
/// Feature values use the shortest representation that parses back to the
/// same float, so write-then-load is an identity.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    if schema.has_header {
        let mut header: Vec<String> = (0..data.dim()).map(|i| format!("f{i}")).collect();
        header.push(schema.label_column.clone());
        writer.write_record(&header).map_err(csv_error)?;
    }
    for sample in data.iter() {
        let mut row: Vec<String> =
            sample.features.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{}", sample.label));
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}
