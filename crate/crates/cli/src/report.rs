//! JSON reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The identity or property the check exercises.
    pub anchor: String,
    pub status: Status,
    pub max_deviation: Option<f64>,
    pub tolerance: f64,
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    pub timestamp: String,
}

impl Report {
    /// Sorts records by name and tallies the summary.
    pub fn new(command: &str, seed: u64, mut checks: Vec<CheckRecord>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut summary = Summary { total: checks.len(), ..Summary::default() };
        for c in &checks {
            match c.status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Skip => summary.skipped += 1,
            }
        }
        Self { command: command.into(), seed, checks, summary, timestamp: chrono::Utc::now().to_rfc3339() }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Drops the `timestamp` field so two reports can be compared byte for byte.
pub fn strip_timestamp(json: &str) -> String {
    let mut v: Value = serde_json::from_str(json).expect("valid report JSON");
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
    }
    serde_json::to_string_pretty(&v).expect("value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(name: &str, status: Status) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            anchor: "a".into(),
            status,
            max_deviation: Some(0.0),
            tolerance: 1.0,
            params: BTreeMap::new(),
        }
    }

    #[test]
    fn sorted_and_tallied() {
        let r = Report::new("check", 1, vec![record("b", Status::Fail), record("a", Status::Pass), record("c", Status::Skip)]);
        let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(r.summary, Summary { total: 3, passed: 1, failed: 1, skipped: 1 });
        assert!(!r.all_passed());
    }

    #[test]
    fn timestamp_is_stripped() {
        let r = Report::new("check", 1, vec![record("a", Status::Pass)]);
        let json = r.to_json();
        assert!(json.contains("\"timestamp\""));
        assert!(!strip_timestamp(&json).contains("timestamp"));
        assert!(json.contains("\"status\": \"pass\""));
    }
}
