//! Per-evaluation timing of the proposed barrier against the sampled baseline.

use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{FilterMode, ShapeSource};
use crate::barrier::{CbfParams, PairModel};
use crate::baseline::{baseline_h_and_gradient, BaselineConfig};
use crate::error::{Error, Result};
use crate::geometry::{polygon_from_pose, PlanarPose, RigidPolygonShape};
use crate::sdf::signed_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub name: String,
    pub shape_i: ShapeSource,
    pub shape_j: ShapeSource,
    pub cbf: CbfParams,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    pub methods: Vec<FilterMode>,
    /// Positions are drawn from `[−region, region]²`.
    #[serde(default = "default_region")]
    pub region: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_states() -> usize {
    1000
}

fn default_repeats() -> usize {
    5
}

fn default_region() -> f64 {
    15.0
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states < 1000 {
            return Err(Error::Config(format!("benchmark needs at least 1000 states, got {}", self.states)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.region > 0.0) {
            return Err(Error::Config("region must be positive".into()));
        }
        if self.methods.contains(&FilterMode::Off) {
            return Err(Error::Config("\"off\" is not a barrier method".into()));
        }
        self.cbf.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: FilterMode,
    pub evaluations: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    /// Mean time of this method over the mean time of the proposed barrier.
    pub ratio_to_proposed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub name: String,
    pub states: usize,
    pub repeats: usize,
    pub seed: u64,
    pub methods: Vec<MethodTiming>,
}

impl BenchReport {
    pub fn timing(&self, method: FilterMode) -> Option<&MethodTiming> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["method", "evaluations", "mean_seconds", "median_seconds", "ratio_to_proposed"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for m in &self.methods {
            w.write_record([
                m.method.to_string(),
                m.evaluations.to_string(),
                m.mean_seconds.to_string(),
                m.median_seconds.to_string(),
                m.ratio_to_proposed.map(|r| r.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic pose pairs whose polygons are strictly separated.
pub fn sample_separated_poses(
    shape_i: &RigidPolygonShape,
    shape_j: &RigidPolygonShape,
    count: usize,
    region: f64,
    seed: u64,
) -> Result<Vec<(PlanarPose, PlanarPose)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let pi = std::f64::consts::PI;
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > 1000 * count {
            return Err(Error::Config("region too small to sample separated poses".into()));
        }
        let mut pose = || {
            PlanarPose::new(
                rng.random_range(-region..region),
                rng.random_range(-region..region),
                rng.random_range(-pi..pi),
            )
        };
        let (a, b) = (pose(), pose());
        let sd = signed_distance(&polygon_from_pose(shape_i, &a)?, &polygon_from_pose(shape_j, &b)?);
        if sd.value > 1e-6 {
            out.push((a, b));
        }
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times one value+gradient evaluation per pose pair, `repeats` passes per
/// method, sequentially so methods do not compete for cores.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let shape_i = cfg.shape_i.load(&cfg.base_dir)?;
    let shape_j = cfg.shape_j.load(&cfg.base_dir)?;
    let poses = sample_separated_poses(&shape_i, &shape_j, cfg.states, cfg.region, cfg.seed)?;
    let pair = PairModel::new(shape_i.clone(), shape_j.clone());

    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut times = Vec::with_capacity(poses.len() * cfg.repeats);
        let baseline = match method {
            FilterMode::Baseline(n) => Some(BaselineConfig::new(n)?),
            _ => None,
        };
        for _ in 0..cfg.repeats {
            for (a, b) in &poses {
                let start = Instant::now();
                match &baseline {
                    None => {
                        let e = pair.smooth_barrier(&a.to_state(), &b.to_state(), &cfg.cbf)?;
                        black_box(e);
                    }
                    Some(bc) => {
                        let e = baseline_h_and_gradient(a, b, &shape_i, &shape_j, bc)?;
                        black_box(e);
                    }
                }
                times.push(start.elapsed().as_secs_f64());
            }
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        info!("{method}: mean {:.3} µs over {} evaluations", mean * 1e6, times.len());
        methods.push(MethodTiming {
            method,
            evaluations: times.len(),
            mean_seconds: mean,
            median_seconds: median(&mut times),
            ratio_to_proposed: None,
        });
    }
    if let Some(reference) = methods.iter().find(|m| m.method == FilterMode::Proposed).map(|m| m.mean_seconds) {
        for m in &mut methods {
            m.ratio_to_proposed = Some(m.mean_seconds / reference);
        }
    }
    let report = BenchReport {
        name: cfg.name.clone(),
        states: poses.len(),
        repeats: cfg.repeats,
        seed: cfg.seed,
        methods,
    };
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        report.write_csv(dir.join("bench.csv"))?;
    }
    Ok(report)
}
