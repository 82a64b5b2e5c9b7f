//! Scenario results: a numeric table, named verdicts, and metadata.
//!
//! Emission is byte-stable: floats are printed in Rust's shortest
//! round-trip form, metadata is a sorted map, and all randomness upstream
//! is seeded, so the same seed gives identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One audited inequality (or exactness check). `margin` is the amount by
/// which it holds: verdicts are recorded as `margin >= -tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub satisfied: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub seed: u64,
    /// Hash of the canonical setup text this result was produced from.
    pub setup_hash: String,
    pub tol: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    pub metadata: BTreeMap<String, String>,
}

impl ScenarioResult {
    pub fn new(scenario: &str, seed: u64, setup_hash: &str, tol: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            setup_hash: setup_hash.to_string(),
            tol,
            columns: Vec::new(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn set_columns(&mut self, names: &[&str]) {
        self.columns = names.iter().map(|s| s.to_string()).collect();
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width != header");
        self.rows.push(row);
    }

    /// Record `name` as satisfied iff `margin >= -tol`.
    pub fn check(&mut self, name: &str, margin: f64) {
        let tol = self.tol;
        self.verdicts.push(Verdict {
            name: name.to_string(),
            satisfied: margin >= -tol,
            margin,
        });
    }

    /// Record a check against an explicit tolerance (exactness checks that
    /// should not loosen with --tol).
    pub fn check_with_tol(&mut self, name: &str, margin: f64, tol: f64) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            satisfied: margin >= -tol,
            margin,
        });
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn all_satisfied(&self) -> bool {
        self.verdicts.iter().all(|v| v.satisfied)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("serialize result: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Human-readable verdict block for the terminal.
    pub fn verdict_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let tag = if v.satisfied { "satisfied" } else { "VIOLATED " };
            out.push_str(&format!("{tag}  {:<40} margin {}\n", v.name, fmt_f64(v.margin)));
        }
        out
    }
}

/// Shortest decimal that round-trips to the same f64.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" flapping from sign noise in otherwise-zero slacks.
        return "0".to_string();
    }
    format!("{x}")
}
