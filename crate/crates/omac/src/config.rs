//! Declarative experiment description, read from TOML.
//!
//! See `configs/` for complete examples and the README for the schema.

use std::path::Path;

use omac_core::adapters::StepSchedule;
use omac_core::controller::{InnerReset, QuadGains};
use omac_core::disturbance::DisturbanceSpec;
use omac_core::dynamics::{PendulumParams, QuadrotorParams};
use omac_core::features::BasisLayout;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Number of environments `N`.
    pub outer_iterations: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Same inner schedule and `dim(ĉ)` for every learned controller.
    #[serde(default = "yes")]
    pub fairness: bool,
    /// Write the full per-step logs next to the summaries.
    #[serde(default = "yes")]
    pub persist_logs: bool,
    pub plant: PlantConfig,
    pub wind: WindConfig,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    pub features: FeatureConfig,
    pub inner: InnerConfig,
    pub controllers: Vec<ControllerConfig>,
    #[serde(default)]
    pub checks: CheckToggles,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantConfig {
    Pendulum {
        #[serde(default)]
        params: PendulumParams,
        #[serde(default)]
        lqr: LqrWeights,
    },
    Quadrotor {
        #[serde(default)]
        params: QuadrotorParams,
        #[serde(default)]
        gains: QuadGains,
    },
}

impl PlantConfig {
    pub fn wind_dim(&self) -> usize {
        match self {
            PlantConfig::Pendulum { .. } => 2,
            PlantConfig::Quadrotor { .. } => 3,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            PlantConfig::Pendulum { params, .. } => params.dt,
            PlantConfig::Quadrotor { params, .. } => params.dt,
        }
    }
}

/// `Q = diag(q)`, `R = r` for the discrete LQR design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrWeights {
    pub q: [f64; 2],
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self { q: [1.0, 1.0], r: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindConfig {
    /// Seconds per environment; `T = dwell/dt`.
    pub dwell: f64,
    /// Box half-widths per wind component, or one value for all.
    pub bound: BoxBound,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxBound {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

impl BoxBound {
    pub fn half_widths(&self, dim: usize) -> Vec<f64> {
        match self {
            BoxBound::Uniform(k) => vec![*k; dim],
            BoxBound::PerAxis(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplingConfig {
    #[default]
    RandomUniform,
    FixedList {
        conditions: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    /// `"median"`: median heuristic over the pilot rollout.
    Named(String),
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub layout: BasisLayout,
    /// `dim(ĉ) = h`.
    pub latent_dim: usize,
    /// Columns `p` of the convex meta basis `Y₁`; default `10h`.
    #[serde(default)]
    pub meta_width: Option<usize>,
    /// Columns `p̄` of the bilinear basis `Y`; default `10h`.
    #[serde(default)]
    pub bilinear_width: Option<usize>,
    /// Environments simulated with `f̂ ≡ 0` to set the bandwidth and inner gradient bound.
    #[serde(default = "default_pilot")]
    pub pilot_envs: usize,
}

fn default_pilot() -> usize {
    2
}

impl FeatureConfig {
    pub fn meta_width(&self) -> usize {
        self.meta_width.unwrap_or(10 * self.latent_dim)
    }

    pub fn bilinear_width(&self) -> usize {
        self.bilinear_width.unwrap_or(10 * self.latent_dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerConfig {
    /// Radius `K_c` of the ball for `ĉ`.
    pub radius: f64,
    pub schedule: InnerSchedule,
    #[serde(default)]
    pub reset: InnerReset,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnerSchedule {
    /// `η_t = 2K_c/(G√t)` with `G = margin · max ‖∇_ĉ ℓ‖` over the pilot rollout.
    Pilot {
        #[serde(default = "default_margin")]
        margin: f64,
    },
    InverseSqrt {
        d: f64,
        g: f64,
    },
    Fixed {
        eta: f64,
    },
}

fn default_margin() -> f64 {
    1.5
}

/// `deny_unknown_fields` does not combine with `flatten`; the tagged kind
/// still rejects misspelled kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: ControllerKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControllerKind {
    NoAdapt,
    Omniscient,
    /// Bilinear model with `Θ̂` frozen at its random initialisation.
    Baseline,
    Convex {
        meta: OuterSchedule,
        /// Radius `K_Θ` of the ball for `Θ̂`.
        meta_radius: f64,
    },
    BiConvex {
        #[serde(default)]
        observe_env: bool,
        meta: OuterSchedule,
        meta_radius: f64,
    },
    BilinearRidge {
        lambda: f64,
    },
    Deep {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_bound")]
        spectral_bound: f64,
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        /// Replay minibatch size; `0` means the whole episode.
        #[serde(default)]
        minibatch: usize,
        #[serde(default)]
        optimizer: DeepOptimizer,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64, 64]
}
fn default_bound() -> f64 {
    2.0
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeepOptimizer {
    #[default]
    Adam,
    GradientDescent,
}

/// Meta step sizes for OGD-based meta adapters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterSchedule {
    /// `η̄^(i) = 2K_Θ/(C₁T√i)` with constants from the basis bounds and `W`.
    Theory,
    InverseSqrt { d: f64, g: f64 },
    Fixed { eta: f64 },
}

impl OuterSchedule {
    pub fn explicit(&self) -> Option<StepSchedule> {
        match *self {
            OuterSchedule::Theory => None,
            OuterSchedule::InverseSqrt { d, g } => Some(StepSchedule::InverseSqrt { d, g }),
            OuterSchedule::Fixed { eta } => Some(StepSchedule::Fixed(eta)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckToggles {
    #[serde(default = "yes")]
    pub eiss: bool,
    #[serde(default = "yes")]
    pub paired_streams: bool,
    #[serde(default = "yes")]
    pub diversity: bool,
}

impl Default for CheckToggles {
    fn default() -> Self {
        Self {
            eiss: true,
            paired_streams: true,
            diversity: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Inner steps per environment.
    pub fn horizon(&self) -> usize {
        (self.wind.dwell / self.plant.dt()).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.outer_iterations == 0 || self.horizon() == 0 {
            return bad("outer_iterations and dwell/dt must be positive");
        }
        if self.controllers.is_empty() {
            return bad("at least one controller is required");
        }
        let mut names: Vec<&str> = self.controllers.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("controller names must be unique");
        }
        if names.iter().any(|n| n.is_empty() || n.contains(',')) {
            return bad("controller names must be non-empty and free of commas");
        }
        let dim = self.plant.wind_dim();
        let widths = self.wind.bound.half_widths(dim);
        if widths.len() != dim || widths.iter().any(|w| !(*w >= 0.0)) {
            return bad("wind bound must be non-negative with one entry per wind component");
        }
        if let SamplingConfig::FixedList { conditions } = &self.wind.sampling {
            if conditions.len() != self.outer_iterations {
                return bad("fixed wind list length must equal outer_iterations");
            }
            if conditions.iter().any(|c| c.len() != dim) {
                return bad("fixed wind conditions have the wrong dimension");
            }
        }
        if let Bandwidth::Named(name) = &self.features.bandwidth {
            if name != "median" {
                return bad("bandwidth must be a positive number or \"median\"");
            }
        }
        if let Bandwidth::Fixed(s) = self.features.bandwidth {
            if !(s > 0.0) {
                return bad("bandwidth must be positive");
            }
        }
        if self.features.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if !(self.inner.radius > 0.0) {
            return bad("inner radius must be positive");
        }
        self.disturbance
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for c in &self.controllers {
            match &c.kind {
                ControllerKind::BilinearRidge { lambda } if !(*lambda > 0.0) => {
                    return bad("ridge lambda must be positive")
                }
                ControllerKind::Convex { meta_radius, .. } | ControllerKind::BiConvex { meta_radius, .. }
                    if !(*meta_radius > 0.0) =>
                {
                    return bad("meta_radius must be positive")
                }
                ControllerKind::Deep { epochs: 0, .. } => return bad("deep epochs must be positive"),
                _ => {}
            }
        }
        Ok(())
    }
}
