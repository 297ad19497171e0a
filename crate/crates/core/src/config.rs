//! Experiment configuration, read from TOML. Every table rejects unknown keys.
//!
//! A minimal file only needs `kind` and `seeds`; everything else falls back
//! to the defaults below. See `configs/` in the repository root for one
//! example per experiment kind.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::ActionMultiplier;
use crate::dep::{DepParams, InverseModel};
use crate::dynamics::ArmGeometry;
use crate::envs::{EpisodeSpec, GoalRegion, MountainCarTask};
use crate::error::{Error, Result};
use crate::muscle::MuscleParams;
use crate::noise::{ColoredNoiseParams, OuParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Explore,
    McarDemo,
    Correlate,
    VarianceSweep,
    PsdCheck,
    PrefillCompare,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Explore => "explore",
            Self::McarDemo => "mcar-demo",
            Self::Correlate => "correlate",
            Self::VarianceSweep => "variance-sweep",
            Self::PsdCheck => "psd-check",
            Self::PrefillCompare => "prefill-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Torquearm,
    Arm26,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Torquearm => "torquearm",
            Self::Arm26 => "arm26",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Dep,
    White,
    Pink,
    Red,
    Ou,
}

impl ControllerKind {
    pub const ALL: [Self; 5] = [Self::Dep, Self::White, Self::Pink, Self::Red, Self::Ou];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dep => "dep",
            Self::White => "white",
            Self::Pink => "pink",
            Self::Red => "red",
            Self::Ou => "ou",
        }
    }
}

/// Baseline noise settings for the exploration comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub white_sigma: f64,
    pub pink: ColoredNoiseParams,
    pub red: ColoredNoiseParams,
    pub ou: OuParams,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            white_sigma: 1.0,
            pink: ColoredNoiseParams {
                beta: 1.0,
                sigma: 1.0,
                horizon: 1000,
            },
            red: ColoredNoiseParams {
                beta: 2.0,
                sigma: 1.0,
                horizon: 1000,
            },
            ou: OuParams {
                theta: 0.05,
                sigma: 0.3,
                mu: 0.0,
                x0: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmConfig {
    pub geometry: ArmGeometry,
    /// Torque at a saturated torquearm action (N·m).
    pub max_torque: f64,
    pub muscles: MuscleParams,
    pub goals: GoalRegion,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            geometry: ArmGeometry::default(),
            max_torque: 5.0,
            muscles: MuscleParams::arm26(),
            goals: GoalRegion::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreConfig {
    pub controllers: Vec<ControllerKind>,
    pub multipliers: Vec<usize>,
    pub episodes: usize,
    pub horizon: usize,
    /// Episodes per coverage block; DEP restarts from scratch per block.
    pub block: usize,
    pub grid: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            controllers: ControllerKind::ALL.to_vec(),
            multipliers: vec![1, 300],
            episodes: 50,
            horizon: 1000,
            block: 5,
            grid: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McarConfig {
    pub task: MountainCarTask,
    pub time_dists: Vec<usize>,
    pub kappa: f64,
    /// Standard deviation of the random-action baseline.
    pub baseline_sigma: f64,
}

impl Default for McarConfig {
    fn default() -> Self {
        let mut time_dists: Vec<usize> = (5..=28).collect();
        time_dists.push(50);
        Self {
            task: MountainCarTask::default(),
            time_dists,
            kappa: 1000.0,
            baseline_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceConfig {
    pub sigma: f64,
    pub samples: usize,
    pub multipliers: Vec<usize>,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            samples: 1_000_000,
            multipliers: vec![1, 2, 10, 100, 300],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelateConfig {
    pub controllers: Vec<ControllerKind>,
    pub steps: usize,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        Self {
            controllers: ControllerKind::ALL.to_vec(),
            steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdConfig {
    pub betas: Vec<f64>,
    pub length: usize,
    pub ou_theta: f64,
    pub ou_lags: usize,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 1.0, 2.0],
            length: 1 << 16,
            ou_theta: 0.05,
            ou_lags: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefillConfig {
    pub steps: usize,
    pub white_sigma: f64,
    pub multiplier: usize,
}

impl Default for PrefillConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            white_sigma: 0.5,
            multiplier: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_env")]
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Named DEP preset (`arm` or `locomotion`), ignored when `dep` is given.
    #[serde(default = "default_preset")]
    pub dep_preset: String,
    #[serde(default)]
    pub dep: Option<DepParams>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub arm: ArmConfig,
    #[serde(default)]
    pub explore: ExploreConfig,
    #[serde(default)]
    pub mcar: McarConfig,
    #[serde(default)]
    pub variance: VarianceConfig,
    #[serde(default)]
    pub correlate: CorrelateConfig,
    #[serde(default)]
    pub psd: PsdConfig,
    #[serde(default)]
    pub prefill: PrefillConfig,
}

fn default_env() -> EnvKind {
    EnvKind::Torquearm
}

fn default_workers() -> usize {
    1
}

fn default_preset() -> String {
    "arm".into()
}

impl ExperimentConfig {
    /// Defaults for `kind` with the given seeds.
    pub fn new(kind: ExperimentKind, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            env: default_env(),
            seeds,
            workers: default_workers(),
            out_dir: None,
            dep_preset: default_preset(),
            dep: None,
            noise: NoiseConfig::default(),
            arm: ArmConfig::default(),
            explore: ExploreConfig::default(),
            mcar: McarConfig::default(),
            variance: VarianceConfig::default(),
            correlate: CorrelateConfig::default(),
            psd: PsdConfig::default(),
            prefill: PrefillConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Explicit `dep` table if present, else the named preset with the
    /// inverse-model sign of the configured plant (muscles pull, so `-1`).
    pub fn dep_params(&self) -> Result<DepParams> {
        if let Some(p) = &self.dep {
            return Ok(p.clone());
        }
        let preset = DepParams::preset(&self.dep_preset)
            .ok_or_else(|| Error::Config(format!("unknown DEP preset '{}'", self.dep_preset)))?;
        Ok(preset.with_inverse(match self.env {
            EnvKind::Torquearm => InverseModel::Identity,
            EnvKind::Arm26 => InverseModel::Negated,
        }))
    }

    pub fn episode_spec(&self) -> EpisodeSpec {
        EpisodeSpec::exploration(self.explore.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        self.dep_params()?
            .validate()
            .map_err(|e| Error::Config(format!("dep: {e}")))?;
        self.arm
            .geometry
            .validate()
            .map_err(|e| Error::Config(format!("arm.geometry: {e}")))?;
        self.arm
            .muscles
            .validate_arm26()
            .map_err(|e| Error::Config(format!("arm.muscles: {e}")))?;
        if !(self.arm.max_torque > 0.0) {
            return bad("arm.max_torque must be > 0");
        }
        for m in self.explore.multipliers.iter().chain(&self.variance.multipliers) {
            ActionMultiplier::new(*m).map_err(|e| Error::Config(e.to_string()))?;
        }
        ActionMultiplier::new(self.prefill.multiplier).map_err(|e| Error::Config(e.to_string()))?;
        let e = &self.explore;
        if e.controllers.is_empty() || e.multipliers.is_empty() {
            return bad("explore needs at least one controller and multiplier");
        }
        if e.episodes == 0 || e.horizon == 0 || e.block == 0 || !e.episodes.is_multiple_of(e.block) {
            return bad("explore.episodes must be a positive multiple of explore.block");
        }
        if e.grid < 2 {
            return bad("explore.grid must be >= 2");
        }
        self.noise.pink.validate().map_err(|e| Error::Config(format!("noise.pink: {e}")))?;
        self.noise.red.validate().map_err(|e| Error::Config(format!("noise.red: {e}")))?;
        self.noise.ou.validate().map_err(|e| Error::Config(format!("noise.ou: {e}")))?;
        if !(self.noise.white_sigma >= 0.0) || !(self.prefill.white_sigma >= 0.0) || !(self.variance.sigma > 0.0) {
            return bad("noise scales must be >= 0");
        }
        if self.mcar.task.horizon == 0 || self.mcar.time_dists.contains(&0) {
            return bad("mcar horizon and time_dists must be >= 1");
        }
        if self.variance.samples < 2 || self.correlate.steps < 2 || self.prefill.steps == 0 {
            return bad("sample counts too small");
        }
        if self.psd.length < crate::metrics::PSD_MIN_LEN || self.psd.ou_lags == 0 {
            return bad("psd.length must be >= 256 and psd.ou_lags >= 1");
        }
        Ok(())
    }
}
