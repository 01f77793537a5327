//! Residuals, metrics and artifacts collected during a run.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// One invariant residual. `hard` failures turn the exit status into 4.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Invariant {
    pub value: f64,
    pub limit: f64,
    pub hard: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    prefix: String,
    pub invariants: BTreeMap<String, Invariant>,
    pub metrics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    /// `(file name, CSV body starting with its header row)`.
    pub artifacts: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Names recorded after this call are prefixed with `stage.` (files with `stage_`).
    pub fn set_stage(&mut self, stage: &str) {
        self.prefix = stage.to_string();
    }

    fn key(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    /// Records `value ≤ limit`. Each name may be recorded once per run.
    pub fn invariant(&mut self, name: &str, value: f64, limit: f64, hard: bool) {
        let key = self.key(name);
        let inv = Invariant {
            value,
            limit,
            hard,
            pass: value <= limit,
        };
        let dup = self.invariants.insert(key.clone(), inv);
        assert!(dup.is_none(), "invariant `{key}` recorded twice");
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        let key = self.key(name);
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        let dup = self.metrics.insert(key.clone(), v);
        assert!(dup.is_none(), "metric `{key}` recorded twice");
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        let m = if self.prefix.is_empty() {
            m
        } else {
            format!("{}: {m}", self.prefix)
        };
        self.warnings.push(m);
    }

    pub fn csv(&mut self, file: &str, body: String) {
        let name = if self.prefix.is_empty() {
            file.to_string()
        } else {
            format!("{}_{file}", self.prefix)
        };
        assert!(
            !self.artifacts.iter().any(|(n, _)| *n == name),
            "artifact `{name}` written twice"
        );
        self.artifacts.push((name, body));
    }

    pub fn hard_failures(&self) -> Vec<String> {
        self.invariants
            .iter()
            .filter(|(_, i)| i.hard && !i.pass)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn soft_failures(&self) -> Vec<String> {
        self.invariants
            .iter()
            .filter(|(_, i)| !i.hard && !i.pass)
            .map(|(k, _)| k.clone())
            .collect()
    }
}
