//! Run manifests: config echo, metrics and per-criterion verdicts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equals,
}

/// One numeric comparison behind a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub what: String,
    pub value: Option<f64>,
    pub op: Op,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn new(what: &str, value: f64, op: Op, limit: f64) -> Self {
        let pass = match op {
            Op::AtMost => value <= limit,
            Op::AtLeast => value >= limit,
            Op::Equals => value == limit,
        };
        Self {
            what: what.to_string(),
            value: value.is_finite().then_some(value),
            op,
            limit,
            pass,
        }
    }

    pub fn at_most(what: &str, value: f64, limit: f64) -> Self {
        Self::new(what, value, Op::AtMost, limit)
    }

    pub fn at_least(what: &str, value: f64, limit: f64) -> Self {
        Self::new(what, value, Op::AtLeast, limit)
    }

    /// A yes/no condition, recorded as `1 == 1`.
    pub fn holds(what: &str, ok: bool) -> Self {
        Self::new(what, if ok { 1.0 } else { 0.0 }, Op::Equals, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new(criterion: u8, name: &str, checks: Vec<Check>) -> Self {
        Self {
            criterion,
            name: name.to_string(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Capping {
    pub capped_trajectories: u64,
    pub capped_events: u64,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub code_version: String,
    pub config: Value,
    pub metrics: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capping: Option<Capping>,
    pub criteria: Vec<Verdict>,
    /// Data files written next to the manifest.
    pub outputs: Vec<String>,
    /// Seconds per phase of the run.
    pub timings: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        !self.criteria.is_empty() && self.criteria.iter().all(|v| v.pass)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// `f64` metric; non-finite values become `null` and fail the report's integrity check.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn series(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_needs_every_check() {
        let v = Verdict::new(
            4,
            "x",
            vec![
                Check::at_most("a", 0.01, 0.03),
                Check::at_least("b", 1.0, 2.0),
            ],
        );
        assert!(!v.pass);
        assert!(Verdict::new(4, "x", vec![Check::holds("a", true)]).pass);
        assert!(!Verdict::new(4, "x", vec![]).pass);
    }

    #[test]
    fn nan_fails_and_serializes_as_null() {
        let c = Check::at_most("a", f64::NAN, 1.0);
        assert!(!c.pass && c.value.is_none());
        assert_eq!(num(f64::INFINITY), Value::Null);
        assert_eq!(serde_json::to_string(&Op::AtMost).unwrap(), "\"<=\"");
    }
}
