//! Experiment configuration, parsed from TOML.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Simulate,
    Compare,
    Speeds,
    HairTrigger,
    Subsolution,
    Lemmas,
    VerifyAssumptions,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Simulate,
        Scenario::Compare,
        Scenario::Speeds,
        Scenario::HairTrigger,
        Scenario::Subsolution,
        Scenario::Lemmas,
        Scenario::VerifyAssumptions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Compare => "compare",
            Scenario::Speeds => "speeds",
            Scenario::HairTrigger => "hair_trigger",
            Scenario::Subsolution => "subsolution",
            Scenario::Lemmas => "lemmas",
            Scenario::VerifyAssumptions => "verify_assumptions",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Simulate => "evolve initial data and check the invariant tube [0, theta]",
            Scenario::Compare => "check order preservation between two runs or against a truncated model",
            Scenario::Speeds => "estimate directional spreading speeds and test the drift against them",
            Scenario::HairTrigger => "track min over a moving window until it reaches theta - eps",
            Scenario::Subsolution => "certify a Gaussian sub-solution and check that solutions dominate it",
            Scenario::Lemmas => "check the averaged jump identity and the step-size recurrence",
            Scenario::VerifyAssumptions => "report verdicts for the structural assumptions on the model",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Output directory; relative paths resolve against the working directory.
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub kernels: BTreeMap<String, KernelConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub simulate: Option<SimulateParams>,
    #[serde(default)]
    pub compare: Option<CompareParams>,
    #[serde(default)]
    pub speeds: Option<SpeedsParams>,
    #[serde(default)]
    pub hair_trigger: Option<HairTriggerParams>,
    #[serde(default)]
    pub subsolution: Option<SubsolutionConfig>,
    #[serde(default)]
    pub lemmas: Option<LemmasParams>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Side lengths; the grid covers `[-L/2, L/2)` per axis.
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Gaussian {
        sigma: Vec<f64>,
        #[serde(default)]
        mean: Vec<f64>,
    },
    UniformBall {
        radius: f64,
    },
    Cauchy {
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitionKind {
    Logistic,
    LocalKpp,
    Power,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kappa: f64,
    pub m: f64,
    pub competition: CompetitionKind,
    #[serde(default)]
    pub kappa_minus: Option<f64>,
    /// Name of the dispersal kernel.
    #[serde(default = "default_dispersal")]
    pub dispersal: String,
    /// Name of the competition kernel; defaults to the dispersal kernel.
    #[serde(default)]
    pub competition_kernel: Option<String>,
    /// Carrying capacity for `local_kpp` and `power`.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Exponent for `power`.
    #[serde(default)]
    pub n: Option<i32>,
}

fn default_dispersal() -> String {
    "a".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Constant {
        value: f64,
    },
    /// `amplitude` on the box of half-width `half_width` around `center`.
    Bump {
        amplitude: f64,
        half_width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `level` behind `position` along `direction`, smoothed over `width`.
    Step {
        level: f64,
        #[serde(default)]
        position: f64,
        #[serde(default = "default_direction")]
        direction: Vec<f64>,
        #[serde(default)]
        width: f64,
    },
    /// Independent uniform values on `[0, max]`, drawn from the config seed.
    Random {
        max: f64,
    },
}

fn default_direction() -> Vec<f64> {
    vec![1.0, 0.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub horizon: f64,
    pub snapshot_interval: f64,
    pub picard_tol: f64,
    pub dt_max: f64,
    pub alpha: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        let d = nlspread::EvolveOptions::default();
        EvolveConfig {
            horizon: 10.0,
            snapshot_interval: 1.0,
            picard_tol: d.picard_tol,
            dt_max: d.dt_max,
            alpha: d.alpha,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub tube_tol: f64,
    /// Write every `csv_stride`-th cell of each snapshot.
    pub csv_stride: usize,
    /// Check positivity on `[-w, w]^d` after `positivity_after`.
    pub positivity_window: Option<f64>,
    pub positivity_after: f64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            tube_tol: 1e-8,
            csv_stride: 1,
            positivity_window: None,
            positivity_after: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    /// Second initial datum, expected to stay above `[initial]`.
    pub upper: Option<InitialConfig>,
    /// Random ordered pairs `lo <= hi` in `[0, theta]` drawn from the seed.
    pub random_pairs: usize,
    /// Radius of the truncated dispersal and competition kernels; the
    /// truncated model must stay below the full one.
    pub truncate_radius: Option<f64>,
    pub tol: f64,
    pub metric_half_width: f64,
    /// When set, the truncated run's metric must reach `theta_n - metric_eps`.
    pub metric_eps: Option<f64>,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            upper: None,
            random_pairs: 0,
            truncate_radius: None,
            tol: 1e-8,
            metric_half_width: 5.0,
            metric_eps: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedsParams {
    pub t: f64,
    /// Directions sampled in 2D (1D always uses +1 and -1).
    pub directions: usize,
    pub bracket: [f64; 2],
    pub half_width: f64,
    pub coarsen: usize,
    pub n_max: usize,
    pub tol_c: f64,
    pub drift_in_front: bool,
    pub front: Option<FrontParams>,
}

impl Default for SpeedsParams {
    fn default() -> Self {
        SpeedsParams {
            t: 1.0,
            directions: 8,
            bracket: [0.0, 4.0],
            half_width: 20.0,
            coarsen: 1,
            n_max: 150,
            tol_c: 0.05,
            drift_in_front: false,
            front: None,
        }
    }
}

/// Direct simulation of `[initial]` whose front speed along `+e_1` is
/// compared with the estimate for that direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontParams {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HairTriggerParams {
    pub half_width: f64,
    pub eps: f64,
    pub t_max: f64,
    /// Frame velocity; defaults to the computed drift.
    pub drift: Option<Vec<f64>>,
}

impl Default for HairTriggerParams {
    fn default() -> Self {
        HairTriggerParams {
            half_width: 5.0,
            eps: 0.01,
            t_max: 60.0,
            drift: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsolutionConfig {
    pub alpha_fraction: f64,
    pub q_fraction: f64,
    pub t_start: f64,
    pub t_cap: f64,
    pub samples: usize,
    pub tol: f64,
    /// Cells of the line used for the domination run (same spacing as the
    /// main grid); `None` skips it.
    pub domination_cells: Option<usize>,
    pub domination_tol: f64,
    pub domination_snapshots: usize,
}

impl Default for SubsolutionConfig {
    fn default() -> Self {
        SubsolutionConfig {
            alpha_fraction: 0.5,
            q_fraction: 0.5,
            t_start: 1.0,
            t_cap: 4096.0,
            samples: 9,
            tol: 1e-10,
            domination_cells: None,
            domination_tol: 1e-6,
            domination_snapshots: 64,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmasParams {
    pub jump: Option<JumpParams>,
    pub recurrence: Option<RecurrenceParams>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpParams {
    /// Kernel `b`; defaults to the dispersal kernel.
    #[serde(default)]
    pub kernel: Option<String>,
    /// Left value of the step profile.
    #[serde(default = "one")]
    pub level: f64,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_jump_tol")]
    pub tol: f64,
}

fn one() -> f64 {
    1.0
}

fn default_radii() -> Vec<f64> {
    vec![10.0, 20.0, 40.0]
}

fn default_jump_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceParams {
    pub r1: f64,
    pub p: f64,
    pub q: f64,
    pub target: f64,
    pub cap: usize,
}

/// Rejected configuration, reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let dims = self.grid.extent.len();
        if !(1..=2).contains(&dims) || self.grid.cells.len() != dims {
            return Err(invalid("grid: extent and cells need one or two matching entries"));
        }
        for name in self.kernel_refs() {
            if !self.kernels.contains_key(name) {
                return Err(invalid(format!("kernel `{name}` is referenced but not defined under [kernels]")));
            }
        }
        let e = &self.evolve;
        positive("evolve.horizon", e.horizon)?;
        positive("evolve.snapshot_interval", e.snapshot_interval)?;
        positive("evolve.picard_tol", e.picard_tol)?;
        positive("evolve.dt_max", e.dt_max)?;
        if let Some(p) = &self.simulate {
            positive("simulate.tube_tol", p.tube_tol)?;
        }
        if let Some(p) = &self.compare {
            positive("compare.tol", p.tol)?;
            if let Some(eps) = p.metric_eps {
                positive("compare.metric_eps", eps)?;
            }
        }
        if let Some(p) = &self.speeds {
            positive("speeds.tol_c", p.tol_c)?;
            positive("speeds.t", p.t)?;
            if let Some(f) = &p.front {
                positive("speeds.front.rel_tol", f.rel_tol)?;
            }
        }
        if let Some(p) = &self.hair_trigger {
            positive("hair_trigger.eps", p.eps)?;
            positive("hair_trigger.t_max", p.t_max)?;
        }
        if let Some(p) = &self.subsolution {
            positive("subsolution.tol", p.tol)?;
            positive("subsolution.domination_tol", p.domination_tol)?;
        }
        if let Some(l) = &self.lemmas {
            if let Some(j) = &l.jump {
                positive("lemmas.jump.tol", j.tol)?;
            }
        }
        let needs_initial = matches!(
            self.scenario,
            Scenario::Simulate | Scenario::Compare | Scenario::HairTrigger
        ) || self.speeds.as_ref().is_some_and(|s| s.front.is_some());
        if needs_initial && self.initial.is_none() {
            return Err(invalid(format!("scenario `{}` needs an [initial] table", self.scenario)));
        }
        Ok(())
    }

    fn kernel_refs(&self) -> Vec<&str> {
        let mut refs = vec![self.model.dispersal.as_str()];
        refs.extend(self.model.competition_kernel.as_deref());
        if let Some(j) = self.lemmas.as_ref().and_then(|l| l.jump.as_ref()) {
            refs.extend(j.kernel.as_deref());
        }
        refs
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{field} must be a positive number, got {v}")))
    }
}
