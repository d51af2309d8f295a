//! Scenario drivers. Each one reads its section of the config, writes CSVs into the run
//! directory and returns metrics plus the verdicts of the criteria it covers.

mod bohm;
mod conditional;
mod madelung;
mod measurement;
mod oracle;
mod twofluid;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use madelung_lab::{Complex64, Constants, Grid64, WaveField64};
use serde_json::Value;

use crate::config::{ExperimentConfig, Packet, Scenario};
use crate::error::CliError;
use crate::manifest::{Capping, RunManifest, Verdict};

pub type Result<T> = std::result::Result<T, CliError>;

/// Default `(half_width, points)` of the main grid.
pub fn default_grid(s: Scenario) -> (f64, usize) {
    match s {
        Scenario::OracleEvolve => (10.0, 256),
        Scenario::MadelungCompare => (12.0, 256),
        Scenario::TwofluidVerify => (16.0, 512),
        Scenario::Equivariance => (12.0, 512),
        Scenario::Relaxation => (6.0, 768),
        Scenario::Measurement => (8.0, 128),
        Scenario::ConditionalPair => (10.0, 128),
    }
}

/// Default `(dt, steps)` for scenarios that read them.
pub fn default_time(s: Scenario) -> Option<(f64, usize)> {
    match s {
        Scenario::OracleEvolve => Some((1e-3, 10_000)),
        Scenario::MadelungCompare => Some((1e-3, 0)),
        _ => None,
    }
}

/// Tolerances a config may override.
pub fn tolerance_keys(s: Scenario) -> &'static [&'static str] {
    match s {
        Scenario::OracleEvolve => &["norm_drift", "order_deviation", "stationary_l2"],
        Scenario::MadelungCompare => &[
            "residual",
            "refinement_ratio",
            "direct_density_l2",
            "runtime_s",
        ],
        Scenario::TwofluidVerify => &["rel_err_vs_gradQ", "coefficient_rel", "runtime_s"],
        Scenario::Equivariance => &["l1", "runtime_s"],
        Scenario::Relaxation => &["h_drop"],
        Scenario::Measurement => &["pointer_shift_spacings", "closed_lobe", "stepped_lobe"],
        Scenario::ConditionalPair => &["velocity", "trajectory", "checked_fraction"],
    }
}

/// Metric a sweep tabulates for each scenario.
pub fn primary_metric(s: Scenario) -> &'static str {
    match s {
        Scenario::OracleEvolve => "l2_error_vs_reference",
        Scenario::MadelungCompare => "momentum_residual",
        Scenario::TwofluidVerify => "rel_err_vs_gradQ",
        Scenario::Equivariance => "max_l1",
        Scenario::Relaxation => "best_drop",
        Scenario::Measurement => "stepped_lobe_error",
        Scenario::ConditionalPair => "pair_l1_final",
    }
}

/// State shared by a running scenario.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dir: PathBuf,
    metrics: BTreeMap<String, Value>,
    criteria: Vec<Verdict>,
    outputs: Vec<String>,
    timings: BTreeMap<String, f64>,
    capping: Option<Capping>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig, dir: PathBuf) -> Self {
        Self {
            cfg,
            dir,
            metrics: BTreeMap::new(),
            criteria: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            capping: None,
        }
    }

    pub fn metric(&mut self, name: &str, value: impl Into<Value>) {
        self.metrics.insert(name.to_string(), value.into());
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.criteria.push(v);
    }

    pub fn capping(&mut self, c: Capping) {
        self.capping = Some(c);
    }

    /// Runs `f` and records its duration under `phase`.
    pub fn timed<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> (R, f64) {
        let t0 = Instant::now();
        let r = f();
        let s = t0.elapsed().as_secs_f64();
        self.timings.insert(phase.to_string(), s);
        (r, s)
    }

    /// Seconds spent in timed phases so far.
    pub fn timings_total(&self) -> f64 {
        self.timings.values().sum()
    }

    /// Writes `name` in the run directory through `f`.
    pub fn csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        f(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Like [`Context::csv`] for writers from the core crate.
    pub fn csv_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> madelung_lab::Result<()>,
    ) -> Result<()> {
        let scenario = self.cfg.scenario.name();
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        f(&mut out).map_err(|source| CliError::Run { scenario, source })?;
        out.flush().map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Attaches the scenario name to a core error.
    pub fn core<T>(&self, r: madelung_lab::Result<T>) -> Result<T> {
        r.map_err(|source| CliError::Run {
            scenario: self.cfg.scenario.name(),
            source,
        })
    }

    pub fn constants(&self) -> Result<Constants<f64>> {
        Constants::new(self.cfg.hbar(), self.cfg.mass())
            .map_err(|e| CliError::Usage(format!("constants: {e}")))
    }

    pub fn line_grid(&self) -> Result<Grid64> {
        let (hw, n) = self.cfg.grid();
        Grid64::centered_line(hw, n).map_err(|e| CliError::Usage(format!("grid: {e}")))
    }
}

pub fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}

/// Normalized Gaussian packet.
pub fn packet(grid: Grid64, p: Packet) -> madelung_lab::Result<WaveField64> {
    WaveField64::from_fn(grid, |x, _| {
        let d = x - p.x0;
        Complex64::from_polar((-d * d / (4.0 * p.width * p.width)).exp(), p.k * x)
    })
    .normalized()
}

/// Number of steps of size `dt` that reach `t`, if `t` is a whole multiple of `dt`.
pub fn whole_steps(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    ((n * dt - t).abs() <= 1e-9 * t.abs().max(dt) && n >= 1.0).then_some(n as usize)
}

/// Runs one scenario into its output directory and writes the manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<(RunManifest, PathBuf)> {
    let dir = cfg.output_dir();
    run_in(cfg, &dir).map(|m| (m, dir))
}

pub fn run_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let t0 = Instant::now();
    let mut cx = Context::new(cfg, dir.to_path_buf());
    match cfg.scenario {
        Scenario::OracleEvolve => oracle::run(&mut cx)?,
        Scenario::MadelungCompare => madelung::run(&mut cx)?,
        Scenario::TwofluidVerify => twofluid::run(&mut cx)?,
        Scenario::Equivariance => bohm::equivariance(&mut cx)?,
        Scenario::Relaxation => bohm::relaxation(&mut cx)?,
        Scenario::Measurement => measurement::run(&mut cx)?,
        Scenario::ConditionalPair => conditional::run(&mut cx)?,
    }
    let manifest = RunManifest {
        scenario: cfg.scenario.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.resolved(),
        metrics: cx.metrics,
        capping: cx.capping,
        criteria: cx.criteria,
        outputs: cx.outputs,
        timings: cx.timings,
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_steps_accepts_only_exact_multiples() {
        assert_eq!(whole_steps(1.0, 0.01), Some(100));
        assert_eq!(whole_steps(0.5, 1e-3), Some(500));
        assert_eq!(whole_steps(1.0, 0.3), None);
        assert_eq!(whole_steps(0.0, 0.1), None);
    }
}
