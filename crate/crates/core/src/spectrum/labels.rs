use std::collections::BTreeMap;

use super::DatasetSplit;
use crate::{Error, Result};

/// Reads an `id,qed` CSV into an id → label map. Labels must lie in [0, 1].
///
/// Row numbers in errors count the header as row 1.
pub fn load_labels(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Labels { row: 1, message: e.to_string() })?
        .clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "qed" {
        return Err(Error::Labels {
            row: 1,
            message: format!("expected header 'id,qed', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut labels = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Labels {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Labels { row, message: format!("expected 2 fields, got {}", record.len()) });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Labels { row, message: "empty id".into() });
        }
        let value: f64 = record[1].parse().map_err(|_| Error::Labels {
            row,
            message: format!("label '{}' is not a number", &record[1]),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Labels { row, message: format!("label {value} outside [0, 1]") });
        }
        if labels.insert(id.clone(), value).is_some() {
            return Err(Error::Labels { row, message: format!("duplicate id '{id}'") });
        }
    }
    Ok(labels)
}

/// Parses a `{"train": [...], "val": [...], "test": [...]}` document.
pub fn parse_splits(text: &str) -> Result<DatasetSplit> {
    serde_json::from_str(text).map_err(|e| Error::Splits(e.to_string()))
}

pub fn load_splits(path: &std::path::Path) -> Result<DatasetSplit> {
    parse_splits(&std::fs::read_to_string(path)?)
}
