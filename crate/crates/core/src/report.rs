//! Versioned run records: every output embeds the schema version, the
//! crate version, the command and the fully resolved configuration.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<T> {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    /// Flat key paths to resolved values, defaults included.
    pub config: BTreeMap<String, Value>,
    pub result: T,
}

impl<T: Serialize> RunRecord<T> {
    pub fn new(command: &str, config: BTreeMap<String, Value>, result: T) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.into(),
            command: command.into(),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| LabError::Output(format!("json: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Config echo as `# key = value` lines, for prefixing CSV files.
    pub fn config_header(&self) -> String {
        let mut s = format!(
            "# schema_version = {}\n# code_version = {}\n# command = {}\n",
            self.schema_version, self.code_version, self.command
        );
        for (k, v) in &self.config {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }
}

/// Serialise rows of a flat struct to CSV with a header line.
pub fn rows_to_csv<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Output(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Output(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| LabError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[derive(Serialize)]
    struct Row {
        scale: f64,
        count: usize,
    }

    #[test]
    fn record_round_trips() {
        let mut cfg = BTreeMap::new();
        cfg.insert("seed".to_string(), json!(7));
        cfg.insert("spec.preset".to_string(), json!("koch"));
        let rec = RunRecord::new("pack", cfg, json!({ "count": 12 }));
        let text = rec.to_json().unwrap();
        let back: RunRecord<Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
        assert!(rec.config_header().contains("# spec.preset = \"koch\""));
    }

    #[test]
    fn csv_has_header() {
        let csv = rows_to_csv(&[Row { scale: 0.5, count: 3 }, Row { scale: 0.25, count: 9 }]).unwrap();
        assert_eq!(csv, "scale,count\n0.5,3\n0.25,9\n");
    }
}
