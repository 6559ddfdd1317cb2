use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One named check: measured value, optional bound, signed margin
/// (positive means room to spare) and the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub pass: bool,
}

/// Named metric map with a stable (sorted) key order for serialization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub metrics: BTreeMap<String, Metric>,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Passes when `value <= bound`.
    pub fn upper(&mut self, name: &str, value: f64, bound: f64) -> &mut Self {
        let margin = bound - value;
        self.insert(name, Metric { value, bound: Some(bound), margin: Some(margin), pass: margin >= 0.0 })
    }

    /// Passes when `value >= bound`.
    pub fn lower(&mut self, name: &str, value: f64, bound: f64) -> &mut Self {
        let margin = value - bound;
        self.insert(name, Metric { value, bound: Some(bound), margin: Some(margin), pass: margin >= 0.0 })
    }

    /// Unbounded measurement; passes when finite.
    pub fn value(&mut self, name: &str, value: f64) -> &mut Self {
        self.insert(name, Metric { value, bound: None, margin: None, pass: value.is_finite() })
    }

    pub fn flag(&mut self, name: &str, pass: bool) -> &mut Self {
        let value = if pass { 1.0 } else { 0.0 };
        self.insert(name, Metric { value, bound: None, margin: None, pass })
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    fn insert(&mut self, name: &str, metric: Metric) -> &mut Self {
        self.metrics.insert(name.to_string(), metric);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn all_pass(&self) -> bool {
        self.metrics.values().all(|m| m.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.metrics.iter().filter(|(_, m)| !m.pass).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_verdicts() {
        let mut r = DiagnosticsReport::new();
        r.upper("a", 1.0, 2.0).lower("b", 1.0, 2.0).value("c", f64::NAN);
        assert_eq!(r.get("a").unwrap().margin, Some(1.0));
        assert!(!r.get("b").unwrap().pass);
        assert_eq!(r.failures(), vec!["b", "c"]);
        let json = r.to_json();
        assert!(json.find("\"a\"").unwrap() < json.find("\"b\"").unwrap());
    }
}
