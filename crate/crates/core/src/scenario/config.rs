//! JSON scenario configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::barrier::CbfParams;
use crate::dynamics::{CraneModel, CranePdGains, CraneState, EllipticTrajectory};
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, AGENT_SPLIT};
use crate::geometry::{RigidPolygonShape, Vec2};

/// Which barrier, if any, filters the nominal input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FilterMode {
    Off,
    #[default]
    Proposed,
    /// SDF-linearized baseline with this many samples per edge.
    Baseline(usize),
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "proposed" => Ok(Self::Proposed),
            _ => {
                let density = s
                    .strip_prefix("baseline:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!("filter mode must be off, proposed or baseline:N, got {s:?}"))
                    })?;
                if density < 2 {
                    return Err(Error::Config(format!("baseline density must be at least 2, got {density}")));
                }
                Ok(Self::Baseline(density))
            }
        }
    }
}

impl TryFrom<String> for FilterMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FilterMode> for String {
    fn from(mode: FilterMode) -> Self {
        mode.to_string()
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Off => f.write_str("off"),
            Self::Proposed => f.write_str("proposed"),
            Self::Baseline(n) => write!(f, "baseline:{n}"),
        }
    }
}

/// A shape given either inline or as a path relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSource {
    Path(PathBuf),
    Inline(RigidPolygonShape),
}

impl ShapeSource {
    pub fn load(&self, base_dir: &Path) -> Result<RigidPolygonShape> {
        match self {
            Self::Inline(shape) => Ok(shape.clone()),
            Self::Path(path) => RigidPolygonShape::load(base_dir.join(path)),
        }
    }
}

/// Row-major 2×2 matrix as written in config files.
pub type GainRows = [[f64; 2]; 2];

pub fn gain_matrix(rows: &GainRows) -> Matrix2<f64> {
    Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub mode: FilterMode,
}

fn default_epsilon() -> f64 {
    crate::tolerance::DEFAULT_FILTER_EPSILON
}

/// Two unicycles carrying rigid polygons, each tracking an ellipse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleScenario {
    pub shape_i: ShapeSource,
    pub shape_j: ShapeSource,
    /// `(p_x, p_y, θ)`
    pub initial_i: [f64; 3],
    pub initial_j: [f64; 3],
    pub desired_i: EllipticTrajectory,
    pub desired_j: EllipticTrajectory,
    pub gain_i: GainRows,
    pub gain_j: GainRows,
    pub l_offset: f64,
}

/// Container crane against an obstacle moving at constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraneScenario {
    pub container_shape: ShapeSource,
    pub obstacle_shape: ShapeSource,
    #[serde(default)]
    pub model: CraneModel,
    pub initial: CraneState,
    /// Cart target `(y_d, z_d)`.
    pub target: [f64; 2],
    pub kp: GainRows,
    pub kd: GainRows,
    pub lambda: f64,
    pub obstacle_position: [f64; 2],
    pub obstacle_velocity: [f64; 2],
    pub q_weight: GainRows,
    pub eta_gain: f64,
}

impl CraneScenario {
    pub fn gains(&self) -> CranePdGains {
        CranePdGains {
            kp: gain_matrix(&self.kp),
            kd: gain_matrix(&self.kd),
            lambda: self.lambda,
        }
    }

    pub fn target(&self) -> Vec2 {
        Vec2::new(self.target[0], self.target[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioKind {
    Vehicles(VehicleScenario),
    Crane(CraneScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: ScenarioKind,
    pub cbf: CbfParams,
    pub filter: FilterSection,
    pub dt: f64,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative shape paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub dt: Option<f64>,
    pub kappa: Option<f64>,
    pub buffer: Option<f64>,
    pub filter: Option<FilterMode>,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&text, base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if let Some(dt) = o.dt {
            self.dt = dt;
        }
        if let Some(kappa) = o.kappa {
            self.cbf.kappa = kappa;
        }
        if let Some(b) = o.buffer {
            self.cbf.buffer_b = b;
        }
        if let Some(mode) = o.filter {
            self.filter.mode = mode;
        }
    }

    /// Barrier parameters with the filter's ε folded in.
    pub fn cbf_params(&self) -> CbfParams {
        CbfParams {
            epsilon: self.filter.epsilon,
            ..self.cbf
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig::new(self.filter.alpha).with_epsilon(self.filter.epsilon)
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Checks everything that can be checked before the first step,
    /// including that referenced shape files load and validate.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        if self.step_count() == 0 {
            return Err(Error::Config("duration is shorter than one step".into()));
        }
        self.cbf_params().validate()?;
        self.filter_config().validate()?;
        match &self.scenario {
            ScenarioKind::Vehicles(v) => {
                v.shape_i.load(&self.base_dir)?;
                v.shape_j.load(&self.base_dir)?;
                if v.l_offset == 0.0 || !v.l_offset.is_finite() {
                    return Err(Error::Config("l_offset must be nonzero".into()));
                }
            }
            ScenarioKind::Crane(c) => {
                c.container_shape.load(&self.base_dir)?;
                c.obstacle_shape.load(&self.base_dir)?;
                c.model.validate()?;
                if let FilterMode::Baseline(_) = self.filter.mode {
                    return Err(Error::Config(
                        "the baseline filter is only defined for the vehicle scenario".into(),
                    ));
                }
                if c.initial.theta.abs() >= std::f64::consts::FRAC_PI_2 {
                    return Err(Error::Config("initial swing angle must satisfy |θ| < π/2".into()));
                }
                if gain_matrix(&c.q_weight).cholesky().is_none() {
                    return Err(Error::NotPositiveDefinite("Q"));
                }
                if !(c.eta_gain > 0.0) {
                    return Err(Error::Config("eta_gain must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Fixed settings echoed into every run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub agent_split: f64,
    pub sdf_tie_break: String,
    pub baseline_sample_tie_break: String,
    pub baseline_filter_settings: String,
    pub boundary_zone_width: f64,
}

impl Default for RunMetadata {
    fn default() -> Self {
        Self {
            agent_split: AGENT_SPLIT,
            sdf_tie_break: "lowest edge index".into(),
            baseline_sample_tie_break: "lowest sample index pair".into(),
            baseline_filter_settings: "identical alpha and epsilon to the proposed filter".into(),
            boundary_zone_width: super::BOUNDARY_ZONE,
        }
    }
}
