//! Fixed-step closed-loop simulation of the two case studies.

use std::path::Path;
use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::config::{gain_matrix, FilterMode, RunMetadata, ScenarioConfig, ScenarioKind, VehicleScenario};
use super::trajectory::{Trajectory, TrajectoryStep};
use super::BOUNDARY_ZONE;
use crate::barrier::{CbfParams, PairModel};
use crate::baseline::{baseline_h_and_gradient, BaselineConfig};
use crate::dynamics::{
    crane_derivative, crane_pd_controller, rk4_step, unicycle_derivative, unicycle_tracking_controller, CraneState,
    UnicycleState,
};
use crate::error::{Error, Result};
use crate::filter::{filter_control_affine, AffineAgent, CraneFilter, FilterConfig, FilterResult, Obstacle};
use crate::geometry::{PlanarPose, RigidPolygonShape, Vec2};
use crate::sdf::signed_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub calls: usize,
    pub total_seconds: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub filter_mode: FilterMode,
    pub steps: usize,
    pub min_h_s: Extremum,
    pub min_h_a: Extremum,
    pub min_h_hat: Extremum,
    /// First logged time with `h_s < 0`.
    pub first_collision_time: Option<f64>,
    /// Closed `[first, last]` sample times of every maximal run of `h_s < 0`.
    pub collision_intervals: Vec<[f64; 2]>,
    pub first_filter_activation: Option<f64>,
    pub active_steps: usize,
    /// Barrier value+gradient evaluation only; excludes filtering, integration and I/O.
    pub barrier_timing: TimingSummary,
    pub baseline_failures: usize,
    pub first_baseline_failure: Option<f64>,
    /// Steps where a vanishing constraint normal forced a pass-through.
    pub singular_events: usize,
    pub epsilon_distorted_steps: usize,
    /// Smallest `‖∇ĥ_a‖` over steps with `|ĥ_a| ≤` the boundary-zone width.
    pub min_boundary_gradient_norm: Option<f64>,
    pub metadata: RunMetadata,
    pub config: ScenarioConfig,
}

/// Per-step quantities collected by the scenario-specific loops.
struct StepRecord {
    step: TrajectoryStep,
    gradient_norm: f64,
    eval_seconds: f64,
    singular: bool,
    distorted: bool,
}

/// Simulates `cfg` to completion. Writes `trajectory.csv` and `summary.json`
/// when an output directory is configured.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Trajectory, RunSummary)> {
    cfg.validate()?;
    info!("running {} ({}, {} steps)", cfg.name, cfg.filter.mode, cfg.step_count());
    let (traj, records) = match &cfg.scenario {
        ScenarioKind::Vehicles(v) => VehicleSim::new(cfg, v)?.run(cfg)?,
        ScenarioKind::Crane(_) => CraneSim::new(cfg)?.run(cfg)?,
    };
    let summary = summarize(cfg, &traj, &records);
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, &traj, &summary)?;
    }
    Ok((traj, summary))
}

pub fn write_outputs(dir: &Path, traj: &Trajectory, summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    traj.save_csv(dir.join("trajectory.csv"))?;
    let file = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), summary)?;
    info!("wrote {}", dir.display());
    Ok(())
}

/// Recomputes `ĥ_a` from one logged state row.
pub fn logged_barrier(cfg: &ScenarioConfig, state: &[f64]) -> Result<f64> {
    match &cfg.scenario {
        ScenarioKind::Vehicles(v) => {
            let sim = VehicleSim::new(cfg, v)?;
            let need = 6;
            if state.len() != need {
                return Err(Error::StateDimension {
                    expected: need,
                    got: state.len(),
                });
            }
            Ok(sim.pair.smooth_barrier(&state[..3], &state[3..], &sim.params)?.value)
        }
        ScenarioKind::Crane(_) => {
            let sim = CraneSim::new(cfg)?;
            if state.len() != 8 {
                return Err(Error::StateDimension {
                    expected: 8,
                    got: state.len(),
                });
            }
            let crane = crane_state(&state[..6]);
            let obstacle = Obstacle {
                center: Vec2::new(state[6], state[7]),
                velocity: Vec2::zeros(),
            };
            Ok(sim.filter.barrier(&crane, &obstacle)?.value)
        }
    }
}

fn crane_state(v: &[f64]) -> CraneState {
    CraneState {
        y: v[0],
        z: v[1],
        theta: v[2],
        y_dot: v[3],
        z_dot: v[4],
        theta_dot: v[5],
    }
}

fn abort(step: usize, source: Error) -> Error {
    Error::Aborted {
        step,
        source: Box::new(source),
    }
}

fn check_finite(step: usize, state: &[f64]) -> Result<()> {
    if let Some(i) = state.iter().position(|v| !v.is_finite()) {
        return Err(abort(step, Error::NonFinite(i)));
    }
    Ok(())
}

struct VehicleSim<'a> {
    scenario: &'a VehicleScenario,
    shape_i: RigidPolygonShape,
    shape_j: RigidPolygonShape,
    pair: PairModel,
    params: CbfParams,
    filter: FilterConfig,
}

impl<'a> VehicleSim<'a> {
    fn new(cfg: &ScenarioConfig, scenario: &'a VehicleScenario) -> Result<Self> {
        let shape_i = scenario.shape_i.load(&cfg.base_dir)?;
        let shape_j = scenario.shape_j.load(&cfg.base_dir)?;
        Ok(Self {
            scenario,
            pair: PairModel::new(shape_i.clone(), shape_j.clone()),
            shape_i,
            shape_j,
            params: cfg.cbf_params(),
            filter: cfg.filter_config(),
        })
    }

    fn run(&self, cfg: &ScenarioConfig) -> Result<(Trajectory, Vec<StepRecord>)> {
        let v = self.scenario;
        let mut traj = Trajectory::new(
            &["px_i", "py_i", "theta_i", "px_j", "py_j", "theta_j"],
            &["v_i", "omega_i", "v_j", "omega_j"],
            2,
        );
        let mut records = Vec::with_capacity(cfg.step_count() + 1);
        let mut xi = UnicycleState::new(v.initial_i[0], v.initial_i[1], v.initial_i[2]);
        let mut xj = UnicycleState::new(v.initial_j[0], v.initial_j[1], v.initial_j[2]);
        let (gain_i, gain_j) = (gain_matrix(&v.gain_i), gain_matrix(&v.gain_j));
        let steps = cfg.step_count();

        for k in 0..=steps {
            let t = k as f64 * cfg.dt;
            let si = [xi.p_x, xi.p_y, xi.theta];
            let sj = [xj.p_x, xj.p_y, xj.theta];
            check_finite(k, &si)?;
            check_finite(k, &sj)?;

            let timer = Instant::now();
            let eval = self.pair.evaluate(&si, &sj).map_err(|e| abort(k, e))?;
            let smooth = eval.smooth(&self.params).map_err(|e| abort(k, e))?;
            let mut eval_seconds = timer.elapsed().as_secs_f64();
            let h_s = signed_distance(&eval.polygon_i, &eval.polygon_j).value;

            let u0i = unicycle_tracking_controller(&xi, &v.desired_i.position(t), &v.desired_i.velocity(t), &gain_i, v.l_offset)?;
            let u0j = unicycle_tracking_controller(&xj, &v.desired_j.position(t), &v.desired_j.velocity(t), &gain_j, v.l_offset)?;
            let agents = [agent(&xi, &u0i), agent(&xj, &u0j)];

            let mut baseline_failure = false;
            let filtered: Option<Result<FilterResult>> = match cfg.filter.mode {
                FilterMode::Off => None,
                FilterMode::Proposed => Some(filter_control_affine(&agents, &smooth, &self.filter)),
                FilterMode::Baseline(density) => {
                    let bcfg = BaselineConfig::new(density)?;
                    let timer = Instant::now();
                    let sample = baseline_h_and_gradient(
                        &PlanarPose::new(si[0], si[1], si[2]),
                        &PlanarPose::new(sj[0], sj[1], sj[2]),
                        &self.shape_i,
                        &self.shape_j,
                        &bcfg,
                    );
                    eval_seconds = timer.elapsed().as_secs_f64();
                    match sample {
                        Ok(b) => Some(filter_control_affine(&agents, &b, &self.filter)),
                        Err(Error::Overlap) => {
                            baseline_failure = true;
                            debug!("step {k}: baseline undefined on overlap, passing nominal input through");
                            None
                        }
                        Err(e) => return Err(abort(k, e)),
                    }
                }
            };

            let mut singular = false;
            let (ui, uj, eta, active, distorted) = match filtered {
                None => (u0i, u0j, vec![f64::NAN; 2], vec![false; 2], false),
                Some(Ok(r)) => (
                    Vector2::new(r.u_star[0][0], r.u_star[0][1]),
                    Vector2::new(r.u_star[1][0], r.u_star[1][1]),
                    r.eta,
                    r.active,
                    r.epsilon_distorted,
                ),
                Some(Err(e @ Error::SingularGradient { .. })) => {
                    warn!("step {k}: {e}; passing nominal input through");
                    singular = true;
                    (u0i, u0j, vec![f64::NAN; 2], vec![false; 2], false)
                }
                Some(Err(e)) => return Err(abort(k, e)),
            };

            records.push(StepRecord {
                step: TrajectoryStep {
                    time: t,
                    state: si.iter().chain(&sj).copied().collect(),
                    nominal: vec![u0i[0], u0i[1], u0j[0], u0j[1]],
                    filtered: vec![ui[0], ui[1], uj[0], uj[1]],
                    h_hat: smooth.value,
                    h_a: eval.h_a(),
                    h_s,
                    eta,
                    active,
                    baseline_failure,
                },
                gradient_norm: smooth.gradient().norm(),
                eval_seconds,
                singular,
                distorted,
            });

            if k < steps {
                xi = UnicycleState::from_vector(&rk4_step(
                    |s| unicycle_derivative(&UnicycleState::from_vector(s), &ui),
                    &xi.to_vector(),
                    cfg.dt,
                ));
                xj = UnicycleState::from_vector(&rk4_step(
                    |s| unicycle_derivative(&UnicycleState::from_vector(s), &uj),
                    &xj.to_vector(),
                    cfg.dt,
                ));
            }
        }
        traj.steps = records.iter().map(|r| r.step.clone()).collect();
        Ok((traj, records))
    }
}

fn agent(state: &UnicycleState, nominal: &Vector2<f64>) -> AffineAgent {
    let g = state.input_matrix();
    AffineAgent {
        drift: DVector::zeros(3),
        input_matrix: DMatrix::from_column_slice(3, 2, g.as_slice()),
        nominal: DVector::from_column_slice(nominal.as_slice()),
    }
}

struct CraneSim {
    filter: CraneFilter,
}

impl CraneSim {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let ScenarioKind::Crane(c) = &cfg.scenario else {
            unreachable!("CraneSim built from a non-crane scenario");
        };
        let filter = CraneFilter::new(
            c.container_shape.load(&cfg.base_dir)?,
            c.obstacle_shape.load(&cfg.base_dir)?,
            c.model,
            gain_matrix(&c.q_weight),
            cfg.filter.alpha,
            c.eta_gain,
            cfg.cbf_params(),
        )?;
        Ok(Self { filter })
    }

    fn run(&self, cfg: &ScenarioConfig) -> Result<(Trajectory, Vec<StepRecord>)> {
        let ScenarioKind::Crane(c) = &cfg.scenario else {
            unreachable!("CraneSim built from a non-crane scenario");
        };
        let mut traj = Trajectory::new(
            &["y", "z", "theta", "y_dot", "z_dot", "theta_dot", "obstacle_x", "obstacle_y"],
            &["y", "z"],
            1,
        );
        let model = c.model;
        let gains = c.gains();
        let target = c.target();
        let p0 = Vec2::new(c.obstacle_position[0], c.obstacle_position[1]);
        let velocity = Vec2::new(c.obstacle_velocity[0], c.obstacle_velocity[1]);
        let steps = cfg.step_count();
        let mut records = Vec::with_capacity(steps + 1);
        let mut x = c.initial;

        for k in 0..=steps {
            let t = k as f64 * cfg.dt;
            // exact constant-velocity motion, no integration error
            let obstacle = Obstacle {
                center: p0 + velocity * t,
                velocity,
            };
            let sv = x.to_vector();
            check_finite(k, sv.as_slice())?;
            if x.theta.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(abort(k, Error::Model(format!("swing angle {} left (−π/2, π/2)", x.theta))));
            }

            let load = x.load_position(&model);
            let xo = [obstacle.center.x, obstacle.center.y];
            let timer = Instant::now();
            let eval = self.filter.pair.evaluate(&[load.x, load.y], &xo).map_err(|e| abort(k, e))?;
            let smooth = eval.smooth(&self.filter.params).map_err(|e| abort(k, e))?;
            let eval_seconds = timer.elapsed().as_secs_f64();
            let h_s = signed_distance(&eval.polygon_i, &eval.polygon_j).value;
            let h_a = eval.h_a();
            let h_hat = smooth.value;
            let gradient_norm = smooth.gradient().norm();

            let u0 = crane_pd_controller(&x, &target, &gains, &model);
            let mut singular = false;
            let (u, eta, active, distorted) = match cfg.filter.mode {
                FilterMode::Off => (u0, f64::NAN, false, false),
                FilterMode::Proposed => match self.filter.filter_with(&u0, &x, &obstacle, smooth) {
                    Ok(out) => (
                        Vector2::new(out.result.u_star[0][0], out.result.u_star[0][1]),
                        out.result.eta[0],
                        out.result.active[0],
                        out.result.epsilon_distorted,
                    ),
                    Err(e @ Error::DegenerateConstraint) => {
                        warn!("step {k}: {e}; passing nominal input through");
                        singular = true;
                        (u0, f64::NAN, false, false)
                    }
                    Err(e) => return Err(abort(k, e)),
                },
                FilterMode::Baseline(_) => unreachable!("rejected by validation"),
            };

            records.push(StepRecord {
                step: TrajectoryStep {
                    time: t,
                    state: sv.iter().copied().chain(xo).collect(),
                    nominal: vec![u0[0], u0[1]],
                    filtered: vec![u[0], u[1]],
                    h_hat,
                    h_a,
                    h_s,
                    eta: vec![eta],
                    active: vec![active],
                    baseline_failure: false,
                },
                gradient_norm,
                eval_seconds,
                singular,
                distorted,
            });

            if k < steps {
                x = CraneState::from_vector(&rk4_step(
                    |s| crane_derivative(&CraneState::from_vector(s), &u, &model),
                    &sv,
                    cfg.dt,
                ));
            }
        }
        traj.steps = records.iter().map(|r| r.step.clone()).collect();
        Ok((traj, records))
    }
}

fn minimum(steps: &[TrajectoryStep], f: impl Fn(&TrajectoryStep) -> f64) -> Extremum {
    steps.iter().fold(
        Extremum {
            value: f64::INFINITY,
            time: f64::NAN,
        },
        |best, s| {
            let v = f(s);
            if v < best.value {
                Extremum { value: v, time: s.time }
            } else {
                best
            }
        },
    )
}

fn summarize(cfg: &ScenarioConfig, traj: &Trajectory, records: &[StepRecord]) -> RunSummary {
    let steps = &traj.steps;
    let mut intervals: Vec<[f64; 2]> = Vec::new();
    let mut open: Option<[f64; 2]> = None;
    for s in steps {
        if s.h_s < 0.0 {
            open = Some(match open {
                Some([a, _]) => [a, s.time],
                None => [s.time, s.time],
            });
        } else if let Some(iv) = open.take() {
            intervals.push(iv);
        }
    }
    intervals.extend(open);

    let total: f64 = records.iter().map(|r| r.eval_seconds).sum();
    let boundary = records
        .iter()
        .filter(|r| r.step.h_hat.abs() <= BOUNDARY_ZONE)
        .map(|r| r.gradient_norm)
        .reduce(f64::min);

    RunSummary {
        name: cfg.name.clone(),
        filter_mode: cfg.filter.mode,
        steps: steps.len(),
        min_h_s: minimum(steps, |s| s.h_s),
        min_h_a: minimum(steps, |s| s.h_a),
        min_h_hat: minimum(steps, |s| s.h_hat),
        first_collision_time: intervals.first().map(|iv| iv[0]),
        collision_intervals: intervals,
        first_filter_activation: steps.iter().find(|s| s.active.iter().any(|&a| a)).map(|s| s.time),
        active_steps: steps.iter().filter(|s| s.active.iter().any(|&a| a)).count(),
        barrier_timing: TimingSummary {
            calls: records.len(),
            total_seconds: total,
            mean_seconds: total / records.len().max(1) as f64,
        },
        baseline_failures: steps.iter().filter(|s| s.baseline_failure).count(),
        first_baseline_failure: steps.iter().find(|s| s.baseline_failure).map(|s| s.time),
        singular_events: records.iter().filter(|r| r.singular).count(),
        epsilon_distorted_steps: records.iter().filter(|r| r.distorted).count(),
        min_boundary_gradient_norm: boundary,
        metadata: RunMetadata::default(),
        config: cfg.clone(),
    }
}
