//! Experiment configuration: one JSON document per run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Overrides the directory that relative `output_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "MADELUNG_LAB_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    OracleEvolve,
    MadelungCompare,
    TwofluidVerify,
    Equivariance,
    Relaxation,
    Measurement,
    ConditionalPair,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::OracleEvolve,
        Scenario::MadelungCompare,
        Scenario::TwofluidVerify,
        Scenario::Equivariance,
        Scenario::Relaxation,
        Scenario::Measurement,
        Scenario::ConditionalPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::OracleEvolve => "oracle-evolve",
            Scenario::MadelungCompare => "madelung-compare",
            Scenario::TwofluidVerify => "twofluid-verify",
            Scenario::Equivariance => "equivariance",
            Scenario::Relaxation => "relaxation",
            Scenario::Measurement => "measurement",
            Scenario::ConditionalPair => "conditional-pair",
        }
    }

    /// Key of the scenario's own section in the config document.
    pub fn section(self) -> &'static str {
        match self {
            Scenario::OracleEvolve => "oracle",
            Scenario::MadelungCompare => "madelung",
            Scenario::TwofluidVerify => "twofluid",
            Scenario::Equivariance => "equivariance",
            Scenario::Relaxation => "relaxation",
            Scenario::Measurement => "measurement",
            Scenario::ConditionalPair => "conditional",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Diffusion constant of fluid 2; `ħ/2m` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    /// Pointer coupling `λ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Trap frequency `ω`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

/// A Gaussian packet `exp(-(x-x0)²/4s² + i k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub x0: f64,
    pub k: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub packet: Packet,
    /// Time at which the convergence errors are taken.
    pub order_time: f64,
    /// The order fit uses `dt·2^k` for `k = levels-1 .. 0`.
    pub order_levels: usize,
    /// The reference run uses `dt / reference_divisor`.
    pub reference_divisor: usize,
    /// Periods of the ground-state stationarity check.
    pub periods: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            packet: Packet {
                x0: 1.0,
                k: 0.8,
                width: 1.0,
            },
            order_time: 1.0,
            order_levels: 3,
            reference_divisor: 8,
            periods: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadelungSection {
    /// State whose oracle snapshots feed the residuals (harmonic trap).
    pub packet: Packet,
    pub t_eval: f64,
    /// Points and `1/dt` are multiplied by this factor for the refined residuals.
    pub refine_factor: usize,
    /// Free packet integrated directly with the Madelung stepper.
    pub free_packet: Packet,
    pub madelung_dt: f64,
}

impl Default for MadelungSection {
    fn default() -> Self {
        Self {
            packet: Packet {
                x0: 2.0,
                k: 2.0,
                width: 0.7,
            },
            t_eval: 0.5,
            refine_factor: 2,
            free_packet: Packet {
                x0: 0.0,
                k: 0.0,
                width: 1.0,
            },
            madelung_dt: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwofluidSection {
    pub delta_t: f64,
    pub n_micro: usize,
    pub micro_substeps: usize,
    /// Standard deviation of the static Gaussian density.
    pub width: f64,
    /// Number of times `δt` is halved for the monotonicity check.
    pub halvings: usize,
    pub coefficient_diffusions: Vec<f64>,
}

impl Default for TwofluidSection {
    fn default() -> Self {
        Self {
            delta_t: 1e-4,
            n_micro: 16,
            micro_substeps: 1,
            width: 1.0,
            halvings: 2,
            coefficient_diffusions: vec![0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guidance {
    VelocityField,
    #[default]
    WaveGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivarianceSection {
    pub trajectories: usize,
    pub bins: usize,
    pub checkpoints: usize,
    pub steps_per_checkpoint: usize,
    pub cell_spacings: usize,
    pub guidance: Guidance,
}

impl Default for EquivarianceSection {
    fn default() -> Self {
        Self {
            trajectories: 100_000,
            bins: 64,
            checkpoints: 10,
            steps_per_checkpoint: 50,
            cell_spacings: 8,
            guidance: Guidance::WaveGradient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationSection {
    pub omega: [f64; 2],
    pub lowest_mode: usize,
    pub uniform_half_width: [f64; 2],
    pub trajectories: usize,
    pub cell_spacings: usize,
    pub checkpoints: usize,
    pub steps_per_checkpoint: usize,
    pub bootstrap: usize,
    pub guidance: Guidance,
}

impl Default for RelaxationSection {
    fn default() -> Self {
        let s = madelung_lab::bohm::RelaxationSetup::default();
        Self {
            omega: s.omega,
            lowest_mode: s.lowest_mode,
            uniform_half_width: s.uniform_half_width,
            trajectories: s.trajectories,
            cell_spacings: s.cell_spacings,
            checkpoints: s.checkpoints,
            steps_per_checkpoint: s.steps_per_checkpoint,
            bootstrap: s.bootstrap,
            guidance: Guidance::WaveGradient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSection {
    pub pointer_half_width: f64,
    pub pointer_points: usize,
    pub pointer_center: f64,
    pub pointer_width: f64,
    pub duration: f64,
    /// Eigenstate index of the single-state run.
    pub eigenstate: usize,
    /// The two eigenstates put in equal superposition.
    pub superposition: [usize; 2],
    /// Strang steps of the brute-force cross-check.
    pub stepped_steps: usize,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            pointer_half_width: 10.0,
            pointer_points: 128,
            pointer_center: -4.0,
            pointer_width: 0.3,
            duration: 2.0,
            eigenstate: 1,
            superposition: [0, 1],
            stepped_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionalSection {
    /// Random configurations for the velocity identity.
    pub configurations: usize,
    /// Configurations are drawn from `[-box, box]²`.
    pub sample_box: f64,
    pub packets: [Packet; 2],
    pub product_dt: f64,
    pub product_steps: usize,
    pub product_start: [f64; 2],
    pub pair_half_width: f64,
    pub pair_points: usize,
    pub pairs: usize,
    pub pair_bins: usize,
    pub pair_steps: usize,
}

impl Default for ConditionalSection {
    fn default() -> Self {
        Self {
            configurations: 1000,
            sample_box: 4.0,
            packets: [
                Packet {
                    x0: -1.5,
                    k: 0.8,
                    width: 0.9,
                },
                Packet {
                    x0: 1.5,
                    k: -0.5,
                    width: 1.2,
                },
            ],
            product_dt: 0.02,
            product_steps: 60,
            product_start: [-0.8, 1.9],
            pair_half_width: 12.0,
            pair_points: 128,
            pairs: 10_000,
            pair_bins: 32,
            pair_steps: 200,
        }
    }
}

/// One run. Shared keys sit at the top level; each scenario reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub madelung: MadelungSection,
    #[serde(default)]
    pub twofluid: TwofluidSection,
    #[serde(default)]
    pub equivariance: EquivarianceSection,
    #[serde(default)]
    pub relaxation: RelaxationSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub conditional: ConditionalSection,
}

/// Shared keys a scenario does not read; setting them is a config error.
fn unused_keys(s: Scenario) -> &'static [&'static str] {
    match s {
        Scenario::OracleEvolve => &["seed", "constants.diffusion", "constants.coupling"],
        Scenario::MadelungCompare => {
            &["steps", "seed", "constants.diffusion", "constants.coupling"]
        }
        Scenario::TwofluidVerify => &[
            "dt",
            "steps",
            "seed",
            "constants.coupling",
            "constants.omega",
        ],
        Scenario::Equivariance => &["dt", "steps", "constants.diffusion", "constants.coupling"],
        Scenario::Relaxation => &[
            "dt",
            "steps",
            "constants.diffusion",
            "constants.coupling",
            "constants.omega",
        ],
        Scenario::Measurement => &["dt", "steps", "seed", "constants.diffusion"],
        Scenario::ConditionalPair => &["dt", "steps", "constants.diffusion", "constants.coupling"],
    }
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: Self =
            serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn is_set(&self, key: &str) -> bool {
        match key {
            "dt" => self.dt.is_some(),
            "steps" => self.steps.is_some(),
            "seed" => self.seed.is_some(),
            "constants.diffusion" => self.constants.diffusion.is_some(),
            "constants.coupling" => self.constants.coupling.is_some(),
            "constants.omega" => self.constants.omega.is_some(),
            _ => false,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        for key in unused_keys(self.scenario) {
            if self.is_set(key) {
                return Err(CliError::Usage(format!(
                    "{key}: not used by scenario {}",
                    self.scenario
                )));
            }
        }
        let positive = [
            ("grid.half_width", self.grid.half_width),
            ("dt", self.dt),
            ("constants.hbar", self.constants.hbar),
            ("constants.mass", self.constants.mass),
            ("constants.diffusion", self.constants.diffusion),
            ("constants.omega", self.constants.omega),
        ];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Usage(format!(
                        "{key}: must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if let Some(c) = self.constants.coupling {
            if !c.is_finite() {
                return Err(CliError::Usage(format!(
                    "constants.coupling: must be finite, got {c}"
                )));
            }
        }
        if let Some(n) = self.grid.points {
            if n < 8 {
                return Err(CliError::Usage(format!(
                    "grid.points: need at least 8, got {n}"
                )));
            }
        }
        if self.steps == Some(0) {
            return Err(CliError::Usage("steps: must be at least 1".into()));
        }
        let allowed = crate::scenario::tolerance_keys(self.scenario);
        for (key, v) in &self.tolerances {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "tolerances.{key}: unknown for scenario {}; expected one of {}",
                    self.scenario,
                    allowed.join(", ")
                )));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(CliError::Usage(format!(
                    "tolerances.{key}: must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn hbar(&self) -> f64 {
        self.constants.hbar.unwrap_or(1.0)
    }

    pub fn mass(&self) -> f64 {
        self.constants.mass.unwrap_or(1.0)
    }

    /// `D`, defaulting to `ħ/2m`.
    pub fn diffusion(&self) -> f64 {
        self.constants
            .diffusion
            .unwrap_or(self.hbar() / (2.0 * self.mass()))
    }

    /// Pointer coupling `λ`.
    pub fn coupling(&self) -> f64 {
        self.constants.coupling.unwrap_or(2.0)
    }

    pub fn omega(&self) -> f64 {
        self.constants.omega.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    /// Output directory: relative paths resolve against [`OUTPUT_ROOT_ENV`] when it is set.
    /// With the variable set, an absolute `output_dir` keeps only its last component.
    pub fn output_dir(&self) -> PathBuf {
        let dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.scenario.name()));
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => {
                let root = PathBuf::from(root);
                if dir.is_absolute() {
                    root.join(
                        dir.file_name()
                            .unwrap_or_else(|| self.scenario.name().as_ref()),
                    )
                } else {
                    root.join(dir)
                }
            }
            _ => dir,
        }
    }

    /// The config with every shared default filled in, as echoed in the manifest.
    pub fn resolved(&self) -> Value {
        let mut c = self.clone();
        let (hw, n) = crate::scenario::default_grid(self.scenario);
        c.grid.half_width.get_or_insert(hw);
        c.grid.points.get_or_insert(n);
        c.constants.hbar = Some(self.hbar());
        c.constants.mass = Some(self.mass());
        let unused = unused_keys(self.scenario);
        if !unused.contains(&"constants.diffusion") {
            c.constants.diffusion = Some(self.diffusion());
        }
        if !unused.contains(&"constants.coupling") {
            c.constants.coupling = Some(self.coupling());
        }
        if !unused.contains(&"constants.omega") {
            c.constants.omega = Some(self.omega());
        }
        if !unused.contains(&"seed") {
            c.seed = Some(self.seed());
        }
        if let Some((dt, steps)) = crate::scenario::default_time(self.scenario) {
            c.dt.get_or_insert(dt);
            if !unused.contains(&"steps") {
                c.steps.get_or_insert(steps);
            }
        }
        let mut v = serde_json::to_value(&c).expect("config serializes");
        // keep only the section the scenario reads
        if let Value::Object(map) = &mut v {
            for s in Scenario::ALL {
                if s != self.scenario {
                    map.remove(s.section());
                }
            }
            map.remove("output_dir");
        }
        v
    }

    pub fn grid(&self) -> (f64, usize) {
        let (hw, n) = crate::scenario::default_grid(self.scenario);
        (
            self.grid.half_width.unwrap_or(hw),
            self.grid.points.unwrap_or(n),
        )
    }
}

/// Sets `param` in a config document. Dotted names address nested keys; a bare name is
/// looked up at the top level, then in the scenario's section. `N` names the sample count.
pub fn set_param(doc: &mut Value, param: &str, value: f64) -> Result<(), CliError> {
    let scenario: Scenario = doc
        .get("scenario")
        .cloned()
        .ok_or_else(|| CliError::Usage("config: missing field `scenario`".into()))
        .and_then(|s| {
            serde_json::from_value(s).map_err(|e| CliError::Usage(format!("scenario: {e}")))
        })?;
    let path: Vec<String> = if param.contains('.') {
        param.split('.').map(String::from).collect()
    } else {
        let name = match (param, scenario) {
            ("N", Scenario::ConditionalPair) => "pairs",
            ("N", _) => "trajectories",
            (p, _) => p,
        };
        let top = ["dt", "steps", "seed"];
        let grid = ["half_width", "points"];
        let constants = ["hbar", "mass", "diffusion", "coupling", "omega"];
        if top.contains(&name) {
            vec![name.to_string()]
        } else if grid.contains(&name) {
            vec!["grid".into(), name.into()]
        } else if constants.contains(&name) {
            vec!["constants".into(), name.into()]
        } else {
            vec![scenario.section().to_string(), name.to_string()]
        }
    };
    let number = if value.fract() == 0.0 && value.abs() < 9.0e15 {
        if value >= 0.0 {
            Value::from(value as u64)
        } else {
            Value::from(value as i64)
        }
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| CliError::Usage(format!("--values: {value} is not a finite number")))?
    };
    let mut node = doc;
    for (i, key) in path.iter().enumerate() {
        let map = node.as_object_mut().ok_or_else(|| {
            CliError::Usage(format!(
                "--param {param}: {} is not an object",
                path[..i].join(".")
            ))
        })?;
        if i + 1 == path.len() {
            map.insert(key.clone(), number);
            return Ok(());
        }
        node = map
            .entry(key.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one component")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unknown_fields_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"scenario": "oracle-evolve", "grdi": {}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("grdi"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"scenario": "oracle-evolve", "oracle": {"periodz": 3}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("periodz"), "{err}");
    }

    #[test]
    fn unused_shared_keys_are_rejected() {
        let err =
            ExperimentConfig::from_json(r#"{"scenario": "relaxation", "dt": 0.1}"#).unwrap_err();
        assert_eq!(err.to_string(), "dt: not used by scenario relaxation");
    }

    #[test]
    fn diffusion_defaults_to_hbar_over_two_m() {
        let c = ExperimentConfig::from_json(
            r#"{"scenario": "twofluid-verify", "constants": {"hbar": 2.0, "mass": 4.0}}"#,
        )
        .unwrap();
        assert_eq!(c.diffusion(), 0.25);
        assert_eq!(c.resolved()["constants"]["diffusion"], json!(0.25));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        for doc in [
            r#"{"scenario": "oracle-evolve", "dt": -1}"#,
            r#"{"scenario": "oracle-evolve", "grid": {"points": 4}}"#,
            r#"{"scenario": "oracle-evolve", "tolerances": {"l1": 0.1}}"#,
            r#"{"scenario": "nope"}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(doc), Err(CliError::Usage(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn resolved_echo_keeps_only_the_scenario_section() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "measurement"}"#).unwrap();
        let v = c.resolved();
        assert!(v.get("measurement").is_some());
        assert!(v.get("oracle").is_none() && v.get("dt").is_none());
        assert_eq!(v["constants"]["coupling"], json!(2.0));
        assert_eq!(v["constants"]["diffusion"], Value::Null);
    }

    #[test]
    fn params_resolve_by_name() {
        let mut doc = json!({"scenario": "equivariance"});
        set_param(&mut doc, "N", 1000.0).unwrap();
        set_param(&mut doc, "omega", 0.5).unwrap();
        set_param(&mut doc, "equivariance.bins", 32.0).unwrap();
        assert_eq!(doc["equivariance"]["trajectories"], json!(1000));
        assert_eq!(doc["constants"]["omega"], json!(0.5));
        let c = ExperimentConfig::from_value(doc).unwrap();
        assert_eq!(c.equivariance.bins, 32);

        let mut doc = json!({"scenario": "twofluid-verify"});
        set_param(&mut doc, "delta_t", 2e-4).unwrap();
        assert_eq!(doc["twofluid"]["delta_t"], json!(2e-4));
    }

    #[test]
    fn env_root_rebases_relative_dirs() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "measurement", "output_dir": "a/b"}"#)
            .unwrap();
        // the variable is process-wide; only this test touches it
        std::env::set_var(OUTPUT_ROOT_ENV, "/tmp/root");
        let d = c.output_dir();
        std::env::remove_var(OUTPUT_ROOT_ENV);
        assert_eq!(d, PathBuf::from("/tmp/root/a/b"));
        assert_eq!(c.output_dir(), PathBuf::from("a/b"));
    }
}
