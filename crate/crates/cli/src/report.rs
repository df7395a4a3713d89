//! JSON report with provenance, and plot-ready CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use guerra_cascades::CheckRecord;

use crate::config::{ConfigError, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch; the only field allowed to differ between
    /// repeated runs.
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    /// True iff every record passes.
    pub pass: bool,
    pub records: Vec<CheckRecord>,
    /// Command-specific payload.
    pub result: serde_json::Value,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, records: Vec<CheckRecord>, result: serde_json::Value) -> Report {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            pass: records.iter().all(|r| r.pass),
            records,
            result,
            provenance: Provenance {
                config_hash: config.hash(),
                seed: config.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; floats keep their shortest round-trip form.
    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

/// Writes to a file, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), ConfigError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| ConfigError(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| ConfigError(format!("stdout: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use guerra_cascades::Estimate;

    #[test]
    fn overall_pass_is_conjunction() {
        let c = RunConfig::default();
        let ok = CheckRecord::equality("a", Estimate::exact(1.0), Estimate::exact(1.0), 3.0, 0.0);
        let bad = CheckRecord::equality("b", Estimate::exact(1.0), Estimate::exact(2.0), 3.0, 0.0);
        assert!(Report::new("x", &c, vec![ok.clone()], serde_json::Value::Null).pass);
        assert!(!Report::new("x", &c, vec![ok, bad], serde_json::Value::Null).pass);
        assert!(Report::new("x", &c, vec![], serde_json::Value::Null).pass);
    }

    #[test]
    fn csv_keeps_full_precision() {
        let mut t = Table::new(&["x", "y"]);
        let v = 0.1f64 + 0.2;
        t.push(vec!["1".into(), v.to_string()]);
        let text = t.to_csv();
        assert_eq!(text.lines().next().unwrap(), "x,y");
        let back: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, v);
    }
}
