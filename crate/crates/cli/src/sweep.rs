//! One run per parameter value, tabulated with a log-log convergence fit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{set_param, ExperimentConfig};
use crate::error::CliError;
use crate::manifest::num;
use crate::scenario;

/// Least-squares slope of `ln y` against `ln x`. `NaN` unless every value is positive.
pub fn fit_order(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: Value,
    pub pass: bool,
    pub run_dir: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub scenario: String,
    pub param: String,
    pub metric: String,
    pub rows: Vec<SweepRow>,
    /// Slope of `ln metric` against `ln value`.
    pub order: Value,
}

impl SweepTable {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},verdict\n", self.param, self.metric);
        for r in &self.rows {
            let m = r
                .metric
                .as_f64()
                .map_or(String::new(), |v| format!("{v:e}"));
            let _ = writeln!(
                s,
                "{:e},{m},{}",
                r.value,
                if r.pass { "pass" } else { "fail" }
            );
        }
        s
    }
}

pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("--values: {v:?} is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() < 3 {
        return Err(CliError::Usage(format!(
            "--values: a sweep needs at least 3 values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs `template` once per value of `param`. Runs go to `<out>/sweep_<param>/<k>`, the table
/// to `<out>/sweep_<param>.csv` and `.json`.
pub fn sweep(
    template: &Value,
    param: &str,
    values: &[f64],
    metric: Option<&str>,
) -> Result<(SweepTable, PathBuf), CliError> {
    if values.len() < 3 {
        return Err(CliError::Usage(format!(
            "--values: a sweep needs at least 3 values, got {}",
            values.len()
        )));
    }
    let base = ExperimentConfig::from_value(template.clone())?;
    let metric = metric
        .unwrap_or(scenario::primary_metric(base.scenario))
        .to_string();
    let out = base.output_dir();
    let tag = safe_name(param);
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut doc = template.clone();
        set_param(&mut doc, param, v)?;
        configs.push(ExperimentConfig::from_value(doc)?);
    }
    let mut rows = Vec::with_capacity(values.len());
    for (k, (cfg, &v)) in configs.iter().zip(values).enumerate() {
        let dir = out.join(format!("sweep_{tag}")).join(k.to_string());
        let m = scenario::run_in(cfg, &dir)?;
        let value = m.metrics.get(&metric).cloned().ok_or_else(|| {
            CliError::Usage(format!(
                "--metric: scenario {} has no metric {metric}",
                base.scenario
            ))
        })?;
        rows.push(SweepRow {
            value: v,
            metric: value,
            pass: m.passed(),
            run_dir: dir.display().to_string(),
        });
    }
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.metric.as_f64().unwrap_or(f64::NAN))
        .collect();
    let table = SweepTable {
        scenario: base.scenario.name().to_string(),
        param: param.to_string(),
        metric,
        order: num(fit_order(values, &ys)),
        rows,
    };
    write_table(&table, &out, &tag)?;
    Ok((table, out))
}

fn write_table(t: &SweepTable, out: &Path, tag: &str) -> Result<(), CliError> {
    let csv = out.join(format!("sweep_{tag}.csv"));
    std::fs::write(&csv, t.to_csv()).map_err(|e| CliError::io(&csv, e))?;
    let json = out.join(format!("sweep_{tag}.json"));
    let text = serde_json::to_string_pretty(t).expect("table serializes") + "\n";
    std::fs::write(&json, text).map_err(|e| CliError::io(&json, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_a_power_law() {
        let x = [0.04, 0.02, 0.01];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.0)).collect();
        assert!((fit_order(&x, &y) - 2.0).abs() < 1e-12);
        let y: Vec<f64> = [1e3f64, 1e4, 1e5].iter().map(|n| n.powf(-0.5)).collect();
        assert!((fit_order(&[1e3, 1e4, 1e5], &y) + 0.5).abs() < 1e-12);
        assert!(fit_order(&x, &[1.0, 0.0, 2.0]).is_nan());
    }

    #[test]
    fn values_need_three_numbers() {
        assert_eq!(
            parse_values("1e-4, 2e-4,4e-4").unwrap(),
            vec![1e-4, 2e-4, 4e-4]
        );
        assert!(matches!(parse_values("1,2"), Err(CliError::Usage(_))));
        assert!(matches!(parse_values("1,x,3"), Err(CliError::Usage(_))));
        assert!(matches!(parse_values("1,inf,3"), Err(CliError::Usage(_))));
    }
}
