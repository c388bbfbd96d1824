//! TPM file formats.
//!
//! JSON: `{"n": int, "labels": [string]?, "rows": [[real]]}`.
//! CSV: `n` lines of `n` comma-separated reals with an optional header line of labels.
//! Both readers run the same validation as [`TransitionMatrix::from_rows`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tpm::TransitionMatrix;

#[derive(Debug, Serialize, Deserialize)]
struct TpmFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

pub fn tpm_from_json_str(s: &str) -> Result<TransitionMatrix<f64>> {
    let file: TpmFile = serde_json::from_str(s)?;
    if file.rows.len() != file.n {
        return Err(Error::Parse(format!("\"n\" is {} but {} rows were given", file.n, file.rows.len())));
    }
    let t = TransitionMatrix::from_rows(file.rows)?;
    match file.labels {
        Some(labels) => t.with_labels(labels),
        None => Ok(t),
    }
}

pub fn tpm_to_json_value(t: &TransitionMatrix<f64>) -> serde_json::Value {
    let file = TpmFile { n: t.n(), labels: t.labels().map(<[String]>::to_vec), rows: t.to_rows() };
    serde_json::to_value(file).expect("tpm serializes")
}

pub fn tpm_to_json_string(t: &TransitionMatrix<f64>) -> String {
    serde_json::to_string(&tpm_to_json_value(t)).expect("tpm serializes")
}

pub fn tpm_from_csv_str(s: &str) -> Result<TransitionMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(s.as_bytes());
    let mut labels = None;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => labels = Some(record.iter().map(str::to_owned).collect()),
            Err(e) => return Err(Error::Parse(format!("csv line {}: {e}", line + 1))),
        }
    }
    let t = TransitionMatrix::from_rows(rows)?;
    match labels {
        Some(labels) => t.with_labels(labels),
        None => Ok(t),
    }
}

pub fn tpm_to_csv_string(t: &TransitionMatrix<f64>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(labels) = t.labels() {
        writer.write_record(labels).expect("in-memory write");
    }
    for row in t.rows() {
        writer.write_record(row.iter().map(|x| x.to_string())).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

/// Reads a TPM, choosing the format from the file extension (`.csv` or JSON otherwise).
pub fn read_tpm(path: &Path) -> Result<TransitionMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        tpm_from_csv_str(&text)
    } else {
        tpm_from_json_str(&text)
    }
}
