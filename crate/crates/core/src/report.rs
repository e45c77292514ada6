//! Machine-readable run artifacts.
//!
//! Every command-line run emits a JSON envelope holding a [`Manifest`] (the
//! fully resolved configuration, code version, seed and threading mode) next
//! to the numeric result, so any run can be re-executed from its own output
//! and compared bitwise.  Tabular series go to CSV with round-trip float
//! formatting.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Version of the output schema; bumped on breaking changes to the envelope
/// or any result layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved subcommand configuration (defaults applied).
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub reproducible: bool,
}

impl Manifest {
    pub fn new(
        tool_version: &str,
        command: &str,
        config: &impl Serialize,
        seed: Option<u64>,
        threads: usize,
        reproducible: bool,
    ) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| CoreError::InvalidInput(format!("config not serializable: {e}")))?;
        Ok(Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: tool_version.to_string(),
            command: command.to_string(),
            config,
            seed,
            threads,
            reproducible,
        })
    }
}

/// Manifest plus result, the one JSON document a run prints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub manifest: Manifest,
    pub result: serde_json::Value,
}

impl Envelope {
    pub fn new(manifest: Manifest, result: &impl Serialize) -> Result<Self> {
        let result = serde_json::to_value(result)
            .map_err(|e| CoreError::InvalidInput(format!("result not serializable: {e}")))?;
        Ok(Envelope { manifest, result })
    }

    /// Deterministic pretty JSON (struct key order is fixed at compile time).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| CoreError::InvalidInput(format!("envelope not serializable: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| CoreError::InvalidInput(format!("malformed envelope: {e}")))
    }
}

/// Round-trip float formatting: shortest decimal string that parses back to
/// the same bits, so CSV artifacts are diffable and lossless.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Minimal CSV builder (values are numeric or simple tokens; no quoting).
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.header.len() {
            return Err(CoreError::InvalidInput(format!(
                "row has {} cells, header has {}",
                cells.len(),
                self.header.len()
            )));
        }
        for cell in &cells {
            if cell.contains(',') || cell.contains('\n') {
                return Err(CoreError::InvalidInput(format!(
                    "cell {cell:?} needs quoting, which this writer does not do"
                )));
            }
        }
        self.rows.push(cells);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct DemoConfig {
        level: usize,
        radius: f64,
    }

    #[test]
    fn envelope_round_trips() {
        let manifest = Manifest::new(
            "0.1.0",
            "demo",
            &DemoConfig { level: 3, radius: 2.5 },
            Some(7),
            1,
            true,
        )
        .unwrap();
        let envelope = Envelope::new(manifest, &serde_json::json!({"value": -1.0})).unwrap();
        let text = envelope.to_json().unwrap();
        let back = Envelope::from_json(&text).unwrap();
        assert_eq!(back.manifest.command, "demo");
        assert_eq!(back.manifest.schema_version, SCHEMA_VERSION);
        assert_eq!(back.manifest.config["level"], 3);
        assert_eq!(back.result["value"], -1.0);
        // Deterministic rendering.
        assert_eq!(text, back.to_json().unwrap());
    }

    #[test]
    fn float_formatting_round_trips_exactly() {
        for v in [0.1, -1.0 / 3.0, 2.0f64.sqrt() * 1e-17, 6.02e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn csv_rejects_ragged_and_unquotable_rows() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_row(vec!["1".into(), "2".into()]).unwrap();
        assert!(t.push_row(vec!["1".into()]).is_err());
        assert!(t.push_row(vec!["1".into(), "x,y".into()]).is_err());
        assert_eq!(t.render(), "a,b\n1,2\n");
    }
}
