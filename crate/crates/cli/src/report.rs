//! Machine-readable command reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};
use tsproc_core::report::Check;
use tsproc_core::ValidationReport;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckRecord {
    pub constraint: String,
    pub key: String,
    pub residual: f64,
    pub max_abs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    pub passed: bool,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        Self {
            constraint: c.constraint.clone(),
            key: c.key.clone(),
            residual: c.residual,
            max_abs: c.max_abs,
            min_eigenvalue: c.min_eigenvalue,
            passed: c.passed,
        }
    }
}

/// One command's result. Everything except `wall_time_s` is a pure function
/// of the inputs and the seed.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub command: Vec<String>,
    pub passed: bool,
    /// Worst residual per constraint name.
    pub residuals: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    pub failures: Vec<CheckRecord>,
    pub details: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Report {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            passed: true,
            residuals: BTreeMap::new(),
            values: BTreeMap::new(),
            failures: Vec::new(),
            details: Map::new(),
            wall_time_s: None,
        }
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    pub fn detail(&mut self, name: impl Into<String>, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("report details serialize");
        self.details.insert(name.into(), v);
    }

    /// Merges a validation under `prefix` and returns whether it passed.
    /// Residuals and failures are keyed `"{prefix}:{constraint}"`; the
    /// overall verdict is left to the caller.
    pub fn add_validation(&mut self, prefix: &str, v: &ValidationReport) -> bool {
        for c in &v.checks {
            let name = format!("{prefix}:{}", c.constraint);
            let slot = self.residuals.entry(name.clone()).or_insert(0.0);
            *slot = slot.max(c.residual);
            if !c.passed {
                let mut rec = CheckRecord::from(c);
                rec.constraint = name;
                self.failures.push(rec);
            }
        }
        let checks: Vec<CheckRecord> = v.checks.iter().map(CheckRecord::from).collect();
        let diagnostics: Vec<CheckRecord> = v.diagnostics.iter().map(CheckRecord::from).collect();
        self.detail(
            prefix,
            serde_json::json!({
                "subject": v.subject,
                "tolerance": v.tolerance,
                "passed": v.passed(),
                "checks": checks,
                "diagnostics": diagnostics,
            }),
        );
        v.passed()
    }

    pub fn to_json(&self, pretty: bool) -> String {
        let out = if pretty {
            serde_json::to_string_pretty(self)
        } else {
            serde_json::to_string(self)
        };
        out.expect("report serialization is infallible")
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_carry_prefixed_constraint() {
        let mut v = ValidationReport::new("x", 1e-9);
        v.push_scalar("trace-normalization", "total", 0.5);
        v.push_scalar("trace-normalization", "other", 0.0);
        let mut r = Report::new(vec!["validate".into()]);
        assert!(!r.add_validation("process", &v));
        assert_eq!(r.residuals["process:trace-normalization"], 0.5);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].constraint, "process:trace-normalization");
        assert_eq!(r.failures[0].key, "total");
        // the overall verdict stays with the caller
        assert!(r.passed);
    }

    #[test]
    fn timing_omitted_by_default() {
        let r = Report::new(vec![]);
        assert!(!r.to_json(false).contains("wall_time_s"));
    }
}
