use std::fs;
use std::path::Path;

use condind::io::matrix_from_json;
use condind::{Error, JointDistribution};

pub fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// A matrix from JSON, or from CSV rows when the file does not start with `{`.
pub fn read_matrix(path: &Path) -> Result<JointDistribution, Error> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        return matrix_from_json(&text);
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .map(|field| field.parse::<f64>().map_err(|e| Error::Parse(format!("{field:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    JointDistribution::from_rows(&rows)
}
