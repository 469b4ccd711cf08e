//! Run configuration: strict JSON with a default for every field, and the
//! manifest written next to every artifact set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::StepConfig;
use crate::error::{Error, Result};
use crate::experiments::{PerturbationSpec, StationaryStart};
use crate::model::ModelParams;
use crate::spectral::SpectralGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    /// Power of two.
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 40.0, n_points: 1024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Stationary,
    Pulse,
    Threshold,
    #[default]
    Simulate,
    Sweep,
    Stability,
    Oracle,
}

/// Initial data for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialCondition {
    /// Discrete stationary profile centred on the cluster.
    #[default]
    Stationary,
    /// Discrete traveling pulse (requires `η > η*`).
    Pulse,
    Cold,
    /// `S̄₀(· − shift)` with the cluster at `x_c0`.
    Shifted { shift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityTarget {
    /// Pulse above threshold, stationary state otherwise.
    #[default]
    Auto,
    Pulse,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "type")]
    pub kind: ExperimentKind,
    pub t_final: f64,
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialCondition,
    pub x_c0: f64,
    pub perturbation: PerturbationSpec,
    pub stability_target: StabilityTarget,
    /// Start for stationary stability runs.
    pub stationary_start: StationaryStart,
    /// Source widths for `threshold`.
    pub epsilons: Vec<f64>,
    /// Stiffness values for `sweep`.
    pub etas: Vec<f64>,
    /// Peak of the odd kick in `sweep`.
    pub kick: f64,
    /// Profile CSVs sample `[-profile_half_width, profile_half_width]`.
    pub profile_half_width: f64,
    pub profile_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::default(),
            t_final: 20.0,
            output_stride: 100,
            snapshot_times: Vec::new(),
            initial: InitialCondition::default(),
            x_c0: 0.0,
            perturbation: PerturbationSpec::default(),
            stability_target: StabilityTarget::default(),
            stationary_start: StationaryStart::Cold,
            epsilons: vec![1.0, 0.1, 0.01, 0.001],
            etas: (0..11).map(|i| 2.0 + 0.5 * i as f64).collect(),
            kick: 1e-3,
            profile_half_width: 10.0,
            profile_points: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub step: StepConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
    /// Seed for random perturbation phases.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            grid: GridConfig::default(),
            step: StepConfig::default(),
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn domain(name: &'static str, value: f64, constraint: &'static str) -> Error {
    Error::Domain { name, value, constraint }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        SpectralGrid::new(self.grid.half_width, self.grid.n_points).map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.step.validate()?;
        let e = &self.experiment;
        if !(e.t_final.is_finite() && e.t_final > 0.0) {
            return Err(domain("experiment.t_final", e.t_final, "t_final > 0"));
        }
        if e.output_stride == 0 {
            return Err(domain("experiment.output_stride", 0.0, "output_stride >= 1"));
        }
        if let Some(&t) = e.snapshot_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(domain("experiment.snapshot_times", t, "snapshot times >= 0"));
        }
        e.perturbation.validate()?;
        if let Some(&x) = e.epsilons.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(domain("experiment.epsilons", x, "epsilon > 0"));
        }
        if let Some(&x) = e.etas.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(domain("experiment.etas", x, "eta >= 0"));
        }
        if !e.kick.is_finite() {
            return Err(domain("experiment.kick", e.kick, "finite kick"));
        }
        if !(e.profile_half_width.is_finite() && e.profile_half_width > 0.0) {
            return Err(domain("experiment.profile_half_width", e.profile_half_width, "profile_half_width > 0"));
        }
        if e.profile_points < 2 {
            return Err(domain("experiment.profile_points", e.profile_points as f64, "profile_points >= 2"));
        }
        if !self.grid_contains(e.x_c0) {
            return Err(domain("experiment.x_c0", e.x_c0, "|x_c0| < grid.half_width"));
        }
        Ok(())
    }

    fn grid_contains(&self, x: f64) -> bool {
        x.abs() < self.grid.half_width
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.half_width, self.grid.n_points)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

/// Tolerances in force for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub picard_tol: f64,
    pub mass_law: f64,
    pub bound_slack: f64,
    pub contraction_limit: f64,
    pub fourier_tail: f64,
    pub speed: f64,
}

impl Tolerances {
    pub fn current(cfg: &RunConfig) -> Self {
        Self {
            picard_tol: cfg.step.picard_tol,
            mass_law: crate::dynamics::MASS_LAW_TOL,
            bound_slack: crate::dynamics::BOUND_SLACK,
            contraction_limit: crate::dynamics::CONTRACTION_LIMIT,
            fourier_tail: crate::analytic::FOURIER_TAIL_TOL,
            speed: crate::analytic::SPEED_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub tolerances: Tolerances,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            tolerances: Tolerances::current(config),
            artifacts: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// The effective configuration echoed in a manifest file.
    pub fn read_config(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = value.get("config").ok_or_else(|| Error::Config("manifest has no `config`".into()))?;
        RunConfig::from_json(&cfg.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{ "experiment": {"type": "stationary"} }"#).unwrap();
        assert_eq!(c.experiment.kind, ExperimentKind::Stationary);
        assert_eq!(c.model, ModelParams::default());
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.step, StepConfig::default());
    }

    #[test]
    fn negative_beta_names_constraint() {
        let err = RunConfig::from_json(r#"{ "model": {"beta": -1} }"#).unwrap_err().to_string();
        assert!(err.contains("beta > 0"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_json(r#"{ "grid": {"n_points": 256, "nn": 1} }"#).unwrap_err().to_string();
        assert!(err.contains("nn"), "{err}");
        let err = RunConfig::from_json(r#"{ "step": {"dt": "small"} }"#).unwrap_err().to_string();
        assert!(err.contains("step.dt"), "{err}");
    }

    #[test]
    fn bad_grid_rejected() {
        let err = RunConfig::from_json(r#"{ "grid": {"n_points": 1000} }"#).unwrap_err().to_string();
        assert!(err.contains("grid"), "{err}");
    }

    #[test]
    fn tagged_variants_parse() {
        let c = RunConfig::from_json(
            r#"{ "experiment": {"initial": {"kind": "shifted", "shift": 0.3},
                 "perturbation": {"shape": "gradient_bump", "amplitude": 0.001}},
                 "step": {"gradient": {"method": "barycentric", "order": 8}} }"#,
        )
        .unwrap();
        assert_eq!(c.experiment.initial, InitialCondition::Shifted { shift: 0.3 });
        assert_eq!(c.step.gradient, crate::dynamics::GradientMethod::Barycentric { order: 8 });
    }

    #[test]
    fn manifest_round_trip() {
        let mut c = RunConfig::default();
        c.seed = 17;
        c.model.eta = 1.0 / 3.0;
        c.experiment.snapshot_times = vec![0.1, 2.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, Manifest::new("simulate", &c).to_json()).unwrap();
        assert_eq!(Manifest::read_config(&path).unwrap(), c);
    }
}
