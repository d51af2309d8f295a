//! Aggregates every manifest under a directory into one verdict.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use walkdir::WalkDir;

use crate::error::CliError;
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";

#[derive(Debug, Clone, Serialize)]
pub struct CriterionLine {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestSummary {
    pub path: String,
    pub scenario: String,
    pub pass: bool,
    pub criteria: Vec<CriterionLine>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub pass: bool,
    pub manifests: Vec<ManifestSummary>,
    /// `scenario: criterion name` for every failed verdict.
    pub failed: Vec<String>,
    pub integrity: Vec<String>,
}

fn empty_metric(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => s.is_empty(),
        Value::Array(a) => a.is_empty() || a.iter().any(empty_metric),
        Value::Object(o) => o.is_empty() || o.values().any(empty_metric),
        _ => false,
    }
}

/// Problems that make a manifest untrustworthy regardless of its verdicts.
fn integrity(m: &RunManifest, path: &str) -> Vec<String> {
    let mut out = Vec::new();
    if m.criteria.is_empty() {
        out.push(format!("{path}: no criteria"));
    }
    if m.metrics.is_empty() {
        out.push(format!("{path}: no metrics"));
    }
    for (k, v) in &m.metrics {
        if empty_metric(v) {
            out.push(format!("{path}: metric {k} is empty"));
        }
    }
    let mut seen: Vec<u8> = m.criteria.iter().map(|v| v.criterion).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        out.push(format!("{path}: a criterion appears more than once"));
    }
    for v in &m.criteria {
        if v.checks.is_empty() {
            out.push(format!("{path}: criterion {} has no checks", v.criterion));
        }
    }
    out
}

/// Summarizes every `manifest.json` below `dir`, in path order.
pub fn summarize(dir: &Path) -> Summary {
    let mut manifests = Vec::new();
    let mut failed = Vec::new();
    let mut problems = Vec::new();
    let paths: Vec<PathBuf> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| match e {
            Ok(e) => Some(e),
            Err(err) => {
                problems.push(format!("{}: {err}", dir.display()));
                None
            }
        })
        .filter(|e| e.file_type().is_file() && e.file_name() == MANIFEST_FILE)
        .map(|e| e.into_path())
        .collect();
    for path in paths {
        let shown = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .display()
            .to_string();
        let m = match RunManifest::read(&path) {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("{shown}: unreadable manifest: {e}"));
                continue;
            }
        };
        problems.extend(integrity(&m, &shown));
        for v in m.criteria.iter().filter(|v| !v.pass) {
            failed.push(format!("{}: {} {}", m.scenario, v.criterion, v.name));
        }
        manifests.push(ManifestSummary {
            path: shown,
            scenario: m.scenario.clone(),
            pass: m.passed(),
            criteria: m
                .criteria
                .iter()
                .map(|v| CriterionLine {
                    criterion: v.criterion,
                    name: v.name.clone(),
                    pass: v.pass,
                })
                .collect(),
        });
    }
    if manifests.is_empty() {
        problems.push(format!("no {MANIFEST_FILE} found under {}", dir.display()));
    }
    Summary {
        pass: problems.is_empty() && failed.is_empty() && manifests.iter().all(|m| m.pass),
        manifests,
        failed,
        integrity: problems,
    }
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for m in &self.manifests {
            let _ = writeln!(s, "{} ({})", m.scenario, m.path);
            for c in &m.criteria {
                let _ = writeln!(
                    s,
                    "  {} criterion {} {}",
                    verdict(c.pass),
                    c.criterion,
                    c.name
                );
            }
        }
        for p in &self.integrity {
            let _ = writeln!(s, "INTEGRITY {p}");
        }
        for f in &self.failed {
            let _ = writeln!(s, "FAILED {f}");
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    /// Writes `summary.json` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let json = dir.join(SUMMARY_JSON);
        let text = serde_json::to_string_pretty(self).expect("summary serializes") + "\n";
        std::fs::write(&json, text).map_err(|e| CliError::io(&json, e))?;
        let txt = dir.join(SUMMARY_TEXT);
        std::fs::write(&txt, self.to_text()).map_err(|e| CliError::io(&txt, e))
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{Check, Verdict};
    use serde_json::json;
    use std::collections::BTreeMap;

    fn manifest(scenario: &str, pass: bool, metric: Value) -> RunManifest {
        RunManifest {
            scenario: scenario.into(),
            code_version: "0".into(),
            config: json!({}),
            metrics: BTreeMap::from([("m".to_string(), metric)]),
            capping: None,
            criteria: vec![Verdict::new(
                8,
                "oracle-integrity",
                vec![Check::holds("ok", pass)],
            )],
            outputs: vec![],
            timings: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }

    fn put(root: &Path, sub: &str, m: &RunManifest) {
        let d = root.join(sub);
        std::fs::create_dir_all(&d).unwrap();
        m.write(&d).unwrap();
    }

    #[test]
    fn all_pass_set_passes() {
        let dir = tempfile::tempdir().unwrap();
        put(
            dir.path(),
            "a",
            &manifest("oracle-evolve", true, json!(1e-12)),
        );
        put(
            dir.path(),
            "b/c",
            &manifest("oracle-evolve", true, json!([1.0, 2.0])),
        );
        let s = summarize(dir.path());
        assert!(s.pass, "{}", s.to_text());
        assert_eq!(s.manifests.len(), 2);
    }

    #[test]
    fn one_fail_names_the_criterion() {
        let dir = tempfile::tempdir().unwrap();
        put(
            dir.path(),
            "a",
            &manifest("oracle-evolve", true, json!(1.0)),
        );
        put(dir.path(), "b", &manifest("measurement", false, json!(1.0)));
        let s = summarize(dir.path());
        assert!(!s.pass);
        assert_eq!(
            s.failed,
            vec!["measurement: 8 oracle-integrity".to_string()]
        );
        assert!(s.to_text().contains("FAILED measurement"));
    }

    #[test]
    fn empty_metric_is_an_integrity_failure() {
        for bad in [Value::Null, json!([]), json!([1.0, null]), json!("")] {
            let dir = tempfile::tempdir().unwrap();
            put(
                dir.path(),
                "a",
                &manifest("oracle-evolve", true, bad.clone()),
            );
            let s = summarize(dir.path());
            assert!(!s.pass, "{bad}");
            assert!(s.failed.is_empty());
            assert!(
                s.integrity[0].contains("metric m is empty"),
                "{:?}",
                s.integrity
            );
        }
    }

    #[test]
    fn no_manifests_fails() {
        let dir = tempfile::tempdir().unwrap();
        let s = summarize(dir.path());
        assert!(!s.pass && s.manifests.is_empty() && !s.integrity.is_empty());
        s.write(dir.path()).unwrap();
        assert!(dir.path().join(SUMMARY_TEXT).exists());
    }
}
