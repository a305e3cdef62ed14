//! Randomized property suite over every module invariant.
//!
//! Each check draws its samples from a ChaCha stream keyed by (seed, check,
//! sample index), fans out over rayon and merges by sample index, so the
//! report is identical for a given seed regardless of thread count.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{error_bound, h_a, smooth_h, BarrierEval, CbfParams, ComponentTable, PairModel};
use crate::dynamics::{
    crane_accelerations, crane_accelerations_transformed, crane_derivative, rk4_step, CraneModel, CraneState,
    UnicycleState,
};
use crate::error::{Error, Result};
use crate::filter::{
    filter_control_affine, filter_single_integrator, AffineAgent, CraneFilter, FilterConfig, Obstacle,
};
use crate::geometry::{
    minkowski_difference_vertices, polygon_from_pose, support_value, ConvexPolygon, PlanarPose, PolygonModel,
    RigidPolygonShape, TranslatingShape, TriangleFormation, Vec2,
};
use crate::sdf::{distance_point_to_boundary, polygons_overlap, signed_distance};
use crate::tolerance;

/// The triangle carried by the first vehicle.
pub fn vehicle_triangle() -> RigidPolygonShape {
    RigidPolygonShape::from_columns(&[3.0, -2.0, -2.0], &[0.0, -2.5, 2.5]).expect("valid triangle")
}

/// The trapezoid carried by the second vehicle.
pub fn vehicle_trapezoid() -> RigidPolygonShape {
    RigidPolygonShape::from_columns(&[1.0, 1.0, -1.0, -1.0], &[1.5, -1.5, -1.0, 1.0]).expect("valid trapezoid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteCounts {
    pub pose_pairs: usize,
    pub polygon_pairs: usize,
    pub smooth_states: usize,
    pub gradient_states: usize,
    pub jacobian_states: usize,
    pub filter_instances: usize,
    pub crane_states: usize,
    pub point_queries: usize,
}

impl Default for SuiteCounts {
    fn default() -> Self {
        Self {
            pose_pairs: 10_000,
            polygon_pairs: 1_000,
            smooth_states: 10_000,
            gradient_states: 1_000,
            jacobian_states: 1_000,
            filter_instances: 1_000,
            crane_states: 1_000,
            point_queries: 100,
        }
    }
}

impl SuiteCounts {
    /// Applies `key=value` pairs separated by commas, e.g. `pose_pairs=500`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("count override {item:?} is not key=value")))?;
            let value: usize = value
                .parse()
                .map_err(|_| Error::Config(format!("count for {key} is not a nonnegative integer")))?;
            let slot = match key {
                "pose_pairs" => &mut self.pose_pairs,
                "polygon_pairs" => &mut self.polygon_pairs,
                "smooth_states" => &mut self.smooth_states,
                "gradient_states" => &mut self.gradient_states,
                "jacobian_states" => &mut self.jacobian_states,
                "filter_instances" => &mut self.filter_instances,
                "crane_states" => &mut self.crane_states,
                "point_queries" => &mut self.point_queries,
                _ => return Err(Error::Config(format!("unknown count {key:?}"))),
            };
            *slot = value;
        }
        Ok(self)
    }

    /// Every count multiplied by `factor`, at least one sample each.
    pub fn scaled(self, factor: f64) -> Self {
        let s = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        Self {
            pose_pairs: s(self.pose_pairs),
            polygon_pairs: s(self.polygon_pairs),
            smooth_states: s(self.smooth_states),
            gradient_states: s(self.gradient_states),
            jacobian_states: s(self.jacobian_states),
            filter_instances: s(self.filter_instances),
            crane_states: s(self.crane_states),
            point_queries: s(self.point_queries),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub samples: usize,
    /// Samples the property applied to (the rest were filtered out).
    pub evaluated: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub counts: SuiteCounts,
    pub passed: bool,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

type Rngs = ChaCha8Rng;

fn stream(seed: u64, check: u64, index: usize) -> Rngs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ check.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index as u64);
    rng
}

/// Runs `f` on `n` independent streams; `Ok(None)` marks a filtered sample.
fn sampled<F>(name: &str, id: u64, seed: u64, n: usize, tol: f64, f: F) -> PropertyCheck
where
    F: Fn(&mut Rngs) -> Result<Option<f64>> + Sync,
{
    let outcomes: Vec<Result<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| f(&mut stream(seed, id, i)))
        .collect();
    merge(name, tol, outcomes)
}

fn merge(name: &str, tol: f64, outcomes: Vec<Result<Option<f64>>>) -> PropertyCheck {
    let mut check = PropertyCheck {
        name: name.to_string(),
        samples: outcomes.len(),
        evaluated: 0,
        failures: 0,
        max_error: 0.0,
        tolerance: tol,
        passed: true,
        first_failure: None,
    };
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let failure = match outcome {
            Ok(None) => continue,
            Ok(Some(err)) => {
                check.evaluated += 1;
                check.max_error = check.max_error.max(err);
                // NaN must fail
                (!(err <= tol)).then(|| format!("sample {i}: error {err:e}"))
            }
            Err(e) => {
                check.evaluated += 1;
                check.max_error = f64::INFINITY;
                Some(format!("sample {i}: {e}"))
            }
        };
        if let Some(msg) = failure {
            check.failures += 1;
            check.first_failure.get_or_insert(msg);
        }
    }
    check.passed = check.failures == 0 && check.evaluated > 0;
    check
}

fn random_pose(rng: &mut Rngs, half_width: f64) -> PlanarPose {
    PlanarPose::new(
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
        rng.random_range(-PI..PI),
    )
}

/// Clockwise vertices of a random strictly convex polygon with 3–8 edges:
/// points on an ellipse at well-separated angles.
pub fn random_convex_vertices(rng: &mut impl Rng, max_edges: usize, center_box: f64) -> Vec<Vec2> {
    loop {
        let n = rng.random_range(3..=max_edges.max(3));
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(|a, b| b.total_cmp(a));
        let min_gap = (0..n)
            .map(|k| {
                let next = if k + 1 < n { angles[k + 1] } else { angles[0] - 2.0 * PI };
                angles[k] - next
            })
            .fold(f64::INFINITY, f64::min);
        if min_gap < 0.15 {
            continue;
        }
        let (sx, sy) = (rng.random_range(0.5..3.0), rng.random_range(0.5..3.0));
        let rot = crate::geometry::rotation(rng.random_range(-PI..PI));
        let c = Vec2::new(
            rng.random_range(-center_box..=center_box),
            rng.random_range(-center_box..=center_box),
        );
        return angles
            .iter()
            .map(|a| c + rot * Vec2::new(sx * a.cos(), sy * a.sin()))
            .collect();
    }
}

fn random_polygon(rng: &mut Rngs, center_box: f64) -> ConvexPolygon {
    loop {
        if let Ok(p) = ConvexPolygon::from_vertices(random_convex_vertices(rng, 8, center_box)) {
            return p;
        }
    }
}

fn random_shape(rng: &mut Rngs) -> RigidPolygonShape {
    loop {
        if let Ok(s) = RigidPolygonShape::new(random_convex_vertices(rng, 8, 0.5)) {
            return s;
        }
    }
}

fn sign_band(v: f64) -> i8 {
    if v > tolerance::GEOMETRIC {
        1
    } else if v < -tolerance::GEOMETRIC {
        -1
    } else {
        0
    }
}

fn vehicle_pair() -> PairModel {
    PairModel::new(vehicle_triangle(), vehicle_trapezoid())
}

fn vehicle_states(rng: &mut Rngs, half_width: f64) -> ([f64; 3], [f64; 3]) {
    (random_pose(rng, half_width).to_state(), random_pose(rng, half_width).to_state())
}

/// `(1/κ) ln(Σ_k (Σ_l e^{−κφ})⁻¹ + Σ_k (Σ_l e^{−κψ})⁻¹) − b/κ`, unshifted.
pub fn naive_smooth_value(table: &ComponentTable, params: &CbfParams) -> f64 {
    let k = params.kappa;
    let outer = |m: &DMatrix<f64>| -> f64 {
        m.row_iter()
            .map(|row| 1.0 / row.iter().map(|v| (-k * v).exp()).sum::<f64>())
            .sum()
    };
    ((outer(&table.phi) + outer(&table.psi)).ln() - params.buffer_b) / k
}

/// Minimizer of `½(u − u₀)ᵀQ(u − u₀)` subject to `aᵀu ≥ d`, by checking the
/// unconstrained point and otherwise solving the equality-constrained KKT
/// system with LU.
pub fn kkt_single_constraint(q: &DMatrix<f64>, u0: &DVector<f64>, a: &DVector<f64>, d: f64) -> Option<DVector<f64>> {
    if a.dot(u0) >= d {
        return Some(u0.clone());
    }
    let n = u0.len();
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(q);
    kkt.view_mut((0, n), (n, 1)).copy_from(&(-a));
    kkt.view_mut((n, 0), (1, n)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&(q * u0));
    rhs[n] = d;
    let sol = kkt.lu().solve(&rhs)?;
    (sol[n] >= 0.0).then(|| sol.rows(0, n).into_owned())
}

fn finite_difference<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], h: f64) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Largest deviation of a model's Jacobians from central differences.
fn jacobian_fd_error(model: &dyn PolygonModel, x: &[f64]) -> Result<f64> {
    let h = tolerance::FINITE_DIFFERENCE_STEP;
    let jac = model.jacobians(x)?;
    let r = jac.len();
    let mut err: f64 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let pp = model.polygon(&xp)?;
        xp[i] = x[i] - h;
        let pm = model.polygon(&xp)?;
        xp[i] = x[i];
        for k in 0..r {
            let dn = (pp.normals()[k] - pm.normals()[k]) / (2.0 * h);
            let dv = (pp.vertices()[k] - pm.vertices()[k]) / (2.0 * h);
            let db = (pp.offsets()[k] - pm.offsets()[k]) / (2.0 * h);
            err = err
                .max((dn - jac.d_normals[k].column(i)).amax())
                .max((dv - jac.d_vertices[k].column(i)).amax())
                .max((db - jac.d_offsets[k][i]).abs());
        }
    }
    Ok(err)
}

fn single_integrator_instance(rng: &mut Rngs) -> Result<Option<f64>> {
    let mut v = |n: usize| DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let (gi, gj, u0i, u0j) = (v(3), v(3), v(3), v(3));
    let h = rng.random_range(-1.0..1.0);
    let alpha = rng.random_range(0.5..10.0);
    let barrier = BarrierEval {
        value: h,
        grad_xi: gi.clone(),
        grad_xj: gj.clone(),
        weights: vec![1.0],
    };
    let cfg = FilterConfig::new(alpha).with_epsilon(0.0);
    let r = filter_single_integrator(&u0i, &u0j, &barrier, &cfg)?;
    let q = DMatrix::identity(3, 3);
    let d = -0.5 * alpha * h;
    let mut err: f64 = 0.0;
    for (k, (g, u0)) in [(&gi, &u0i), (&gj, &u0j)].into_iter().enumerate() {
        let oracle = kkt_single_constraint(&q, u0, g, d).ok_or(Error::DegenerateConstraint)?;
        err = err.max((&r.u_star[k] - oracle).amax());
    }
    Ok(Some(err))
}

fn unicycle_instance(rng: &mut Rngs) -> Result<Option<f64>> {
    let mut v = |n: usize| DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let (gi, gj, fi, fj, u0i, u0j) = (v(3), v(3), v(3), v(3), v(2), v(2));
    let (ti, tj) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
    let h = rng.random_range(-1.0..1.0);
    let alpha = rng.random_range(0.5..10.0);
    let barrier = BarrierEval {
        value: h,
        grad_xi: gi.clone(),
        grad_xj: gj.clone(),
        weights: vec![1.0],
    };
    let input = |theta: f64| {
        let g = UnicycleState::new(0.0, 0.0, theta).input_matrix();
        DMatrix::from_column_slice(3, 2, g.as_slice())
    };
    let agents = [
        AffineAgent {
            drift: fi.clone(),
            input_matrix: input(ti),
            nominal: u0i.clone(),
        },
        AffineAgent {
            drift: fj.clone(),
            input_matrix: input(tj),
            nominal: u0j.clone(),
        },
    ];
    let cfg = FilterConfig::new(alpha).with_epsilon(0.0);
    let r = filter_control_affine(&agents, &barrier, &cfg)?;
    let mut err: f64 = 0.0;
    for (k, g) in [&gi, &gj].into_iter().enumerate() {
        let a = agents[k].input_matrix.tr_mul(g);
        if a.norm() < 1e-3 {
            return Ok(None);
        }
        let d = -0.5 * alpha * h - g.dot(&agents[k].drift);
        let oracle = kkt_single_constraint(&DMatrix::identity(2, 2), &agents[k].nominal, &a, d)
            .ok_or(Error::DegenerateConstraint)?;
        err = err.max((&r.u_star[k] - oracle).amax());
    }
    Ok(Some(err))
}

/// Energy-barrier rate `φ̇(u)` assembled from the untransformed dynamics.
fn crane_phi_rate(
    state: &CraneState,
    u: &Vector2<f64>,
    barrier: &BarrierEval,
    obstacle_velocity: &Vec2,
    eta: f64,
    model: &CraneModel,
) -> f64 {
    let acc = crane_accelerations(state, u, model);
    let (s, c) = state.theta.sin_cos();
    let (l, w) = (model.l, state.theta_dot);
    let p_dot = state.transformed_rate(model);
    let p_ddot = nalgebra::Vector3::new(
        acc.x + l * c * acc.z - l * s * w * w,
        acc.y + l * s * acc.z + l * c * w * w,
        acc.z,
    );
    let ml = model.big_m * l;
    let m_dot = Matrix3::new(0.0, 0.0, ml * s, 0.0, 0.0, -ml * c, ml * s, -ml * c, 0.0) * w;
    let m_t = model.transformed_mass_matrix(state.theta);
    let h_dot = barrier.grad_xi[0] * p_dot.x
        + barrier.grad_xi[1] * p_dot.y
        + barrier.grad_xj[0] * obstacle_velocity.x
        + barrier.grad_xj[1] * obstacle_velocity.y;
    eta * h_dot - p_dot.dot(&(m_t * p_ddot)) - 0.5 * p_dot.dot(&(m_dot * p_dot))
}

fn random_crane_state(rng: &mut Rngs) -> CraneState {
    CraneState {
        y: rng.random_range(-5.0..15.0),
        z: rng.random_range(0.0..3.0),
        theta: rng.random_range(-1.2..1.2),
        y_dot: rng.random_range(-2.0..2.0),
        z_dot: rng.random_range(-2.0..2.0),
        theta_dot: rng.random_range(-2.0..2.0),
    }
}

fn crane_filter_instance(rng: &mut Rngs, filter: &CraneFilter) -> Result<Option<f64>> {
    let state = random_crane_state(rng);
    if state.y_dot.hypot(state.z_dot) < 0.1 {
        return Ok(None);
    }
    let mut v2 = || DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
    let barrier = BarrierEval {
        value: 0.0,
        grad_xi: v2(),
        grad_xj: v2(),
        weights: vec![1.0],
    };
    let barrier = BarrierEval {
        value: rng.random_range(-0.5..2.0),
        ..barrier
    };
    let obstacle = Obstacle {
        center: Vec2::new(6.0, 0.5),
        velocity: Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    };
    let u0 = Vector2::new(rng.random_range(-100.0..100.0), rng.random_range(0.0..300.0));
    let mut unregularized = filter.params;
    unregularized.epsilon = 0.0;
    let filter = CraneFilter {
        pair: PairModel::new(TranslatingShape(vehicle_trapezoid()), TranslatingShape(vehicle_trapezoid())),
        params: unregularized,
        ..*filter
    };
    let out = filter.filter_with(&u0, &state, &obstacle, barrier.clone())?;

    // φ̇ is affine in u: recover it from three evaluations.
    let rate = |u: Vector2<f64>| crane_phi_rate(&state, &u, &barrier, &obstacle.velocity, filter.eta_gain, &filter.model);
    let d0 = rate(Vector2::zeros());
    let a = DVector::from_column_slice(&[rate(Vector2::x()) - d0, rate(Vector2::y()) - d0]);
    let phi = out.phi;
    let d = -filter.alpha * phi - d0;
    let q = DMatrix::from_column_slice(2, 2, filter.q_weight.as_slice());
    let u0d = DVector::from_column_slice(u0.as_slice());
    let oracle = kkt_single_constraint(&q, &u0d, &a, d).ok_or(Error::DegenerateConstraint)?;
    let scale = 1.0 + oracle.amax();
    Ok(Some((&out.result.u_star[0] - oracle).amax() / scale))
}

/// Runs every check. Failures are report entries, never errors.
pub fn run_property_suite(seed: u64, counts: &SuiteCounts) -> VerifyReport {
    let mut checks = Vec::new();
    let fd_step = tolerance::FINITE_DIFFERENCE_STEP;

    // h_a against the exact signed distance
    let pose_outcomes: Vec<Result<(f64, f64)>> = (0..counts.pose_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 1, i);
            let pair = vehicle_pair();
            let (si, sj) = vehicle_states(&mut rng, 4.0);
            let eval = pair.evaluate(&si, &sj)?;
            Ok((eval.h_a(), signed_distance(&eval.polygon_i, &eval.polygon_j).value))
        })
        .collect();
    let project = |f: &dyn Fn(f64, f64) -> Option<f64>| -> Vec<Result<Option<f64>>> {
        pose_outcomes
            .iter()
            .map(|o| o.as_ref().map(|&(ha, hs)| f(ha, hs)).map_err(Clone::clone))
            .collect()
    };
    checks.push(merge(
        "h_a_equals_sdf_when_unsafe",
        tolerance::GEOMETRIC,
        project(&|ha, hs| (hs <= 0.0).then(|| (ha - hs).abs())),
    ));
    checks.push(merge(
        "h_a_lower_bounds_sdf",
        tolerance::GEOMETRIC,
        project(&|ha, hs| Some((ha - hs).max(0.0))),
    ));
    checks.push(merge(
        "h_a_sign_matches_sdf",
        0.0,
        project(&|ha, hs| {
            let (a, b) = (sign_band(ha), sign_band(hs));
            (a != 0 && b != 0).then(|| f64::from(u8::from(a != b)))
        }),
    ));

    // Minkowski difference
    checks.push(sampled("minkowski_hull_inside_support_halfspaces", 2, seed, counts.polygon_pairs, tolerance::GEOMETRIC, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        let diff = minkowski_difference_vertices(&pi, &pj);
        let normals: Vec<Vec2> = pi.normals().iter().map(|a| -a).chain(pj.normals().iter().copied()).collect();
        let mut worst: f64 = 0.0;
        for a in &normals {
            let bound = support_value(&pj, a)? + support_value(&pi, &-a)?;
            for w in diff.vertices() {
                worst = worst.max(a.dot(w) - bound);
            }
        }
        Ok(Some(worst))
    }));
    checks.push(sampled("minkowski_facet_normals_in_candidate_set", 3, seed, counts.polygon_pairs, tolerance::GEOMETRIC, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        let diff = minkowski_difference_vertices(&pi, &pj);
        let normals: Vec<Vec2> = pi.normals().iter().map(|a| -a).chain(pj.normals().iter().copied()).collect();
        let worst = diff
            .normals()
            .iter()
            .map(|n| normals.iter().map(|a| (n - a).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        Ok(Some(worst))
    }));
    checks.push(sampled("support_function_additivity", 4, seed, counts.polygon_pairs, tolerance::GEOMETRIC, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        let diff = minkowski_difference_vertices(&pi, &pj);
        let mut worst: f64 = 0.0;
        for k in 0..32 {
            let t = 2.0 * PI * k as f64 / 32.0 + rng.random_range(0.0..0.1);
            let a = Vec2::new(t.cos(), t.sin());
            let lhs = support_value(&diff, &a)?;
            let rhs = support_value(&pj, &a)? + support_value(&pi, &-a)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(Some(worst))
    }));

    // exact SDF
    checks.push(sampled("sdf_symmetric", 5, seed, counts.polygon_pairs, 1e-12, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        Ok(Some((signed_distance(&pi, &pj).value - signed_distance(&pj, &pi).value).abs()))
    }));
    checks.push(sampled("sdf_translation_equivariant", 6, seed, counts.polygon_pairs, 1e-12, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        let t = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let moved = signed_distance(&pi.translated(&t), &pj.translated(&t)).value;
        Ok(Some((signed_distance(&pi, &pj).value - moved).abs()))
    }));
    checks.push(sampled("sdf_sign_matches_separation", 7, seed, counts.polygon_pairs, 0.0, |rng| {
        let (pi, pj) = (random_polygon(rng, 3.0), random_polygon(rng, 3.0));
        let v = signed_distance(&pi, &pj).value;
        let contains = minkowski_difference_vertices(&pi, &pj).contains(&Vec2::zeros());
        Ok(match sign_band(v) {
            0 => None,
            s => Some(f64::from(u8::from((s > 0) == polygons_overlap(&pi, &pj) || (s > 0) == contains))),
        })
    }));
    checks.push(sampled("point_distance_matches_dense_sampling", 8, seed, counts.point_queries, 1e-4, |rng| {
        let poly = random_polygon(rng, 3.0);
        let x = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let dense = crate::sdf::sample_boundary(&poly, 10_000)
            .iter()
            .map(|s| (s - x).norm())
            .fold(f64::INFINITY, f64::min);
        Ok(Some((distance_point_to_boundary(&x, &poly) - dense).abs()))
    }));

    // smoothing error bounds
    let (r_i, r_j) = (3usize, 4usize);
    let b1 = ((r_i + r_j) as f64).ln();
    for &kappa in &[1.0, 5.0, 50.0] {
        for (label, b) in [("ln_b1", b1), ("ln_b1_plus_1", b1 + 1.0)] {
            let name = format!("smoothing_sandwich_kappa_{kappa}_b_{label}");
            let params = CbfParams::new(kappa, b);
            checks.push(sampled(&name, 9, seed, counts.smooth_states, 1e-12, |rng| {
                let (si, sj) = vehicle_states(rng, 10.0);
                let eval = vehicle_pair().evaluate(&si, &sj)?;
                let (lower, upper) = error_bound(&params, r_i, r_j)?;
                let (ha, hh) = (eval.h_a(), eval.smooth(&params)?.value);
                Ok(Some((ha - lower - hh).max(hh - ha - upper).max(0.0)))
            }));
        }
    }
    let rate: Vec<Result<(f64, f64)>> = (0..counts.smooth_states)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 10, i);
            let (si, sj) = vehicle_states(&mut rng, 10.0);
            let eval = vehicle_pair().evaluate(&si, &sj)?;
            let gap = |k: f64| eval.smooth(&CbfParams::new(k, b1)).map(|e| (e.value - eval.h_a()).abs());
            Ok((gap(5.0)?, gap(50.0)?))
        })
        .collect();
    checks.push({
        let (mut m5, mut m50) = (0.0f64, 0.0f64);
        let mut failed = None;
        for (i, r) in rate.into_iter().enumerate() {
            match r {
                Ok((a, b)) => {
                    m5 = m5.max(a);
                    m50 = m50.max(b);
                }
                Err(e) => {
                    failed.get_or_insert(format!("sample {i}: {e}"));
                }
            }
        }
        let ratio = m5 / m50;
        let dev = (ratio / 10.0 - 1.0).abs();
        PropertyCheck {
            name: "smoothing_error_scales_inverse_kappa".into(),
            samples: counts.smooth_states,
            evaluated: counts.smooth_states,
            failures: usize::from(failed.is_some() || !(dev <= 0.2)),
            max_error: dev,
            tolerance: 0.2,
            passed: failed.is_none() && dev <= 0.2,
            first_failure: failed.or_else(|| (!(dev <= 0.2)).then(|| format!("max-gap ratio κ=5/κ=50 is {ratio}"))),
        }
    });
    checks.push(sampled("smooth_value_matches_naive_formula", 11, seed, counts.smooth_states, 1e-10, |rng| {
        let (si, sj) = vehicle_states(rng, 5.0);
        let params = CbfParams::new(rng.random_range(0.5..20.0), b1);
        let eval = vehicle_pair().evaluate(&si, &sj)?;
        Ok(Some((eval.smooth(&params)?.value - naive_smooth_value(&eval.table, &params)).abs()))
    }));

    // gradients
    let params = CbfParams::new(5.0, b1);
    checks.push(sampled("smooth_gradient_matches_finite_differences", 12, seed, counts.gradient_states, 1e-5, |rng| {
        let pair = vehicle_pair();
        let (si, sj) = vehicle_states(rng, 8.0);
        let x: Vec<f64> = si.iter().chain(&sj).copied().collect();
        let g = pair.smooth_barrier(&si, &sj, &params)?.gradient();
        if g.norm() < 1e-6 {
            return Ok(None);
        }
        let fd = finite_difference(|x| Ok(pair.smooth_barrier(&x[..3], &x[3..], &params)?.value), &x, fd_step)?;
        Ok(Some((&g - &fd).norm() / fd.norm().max(1e-300)))
    }));
    checks.push(sampled("smooth_weights_form_convex_combination", 13, seed, counts.gradient_states, tolerance::WEIGHT_SUM, |rng| {
        let (si, sj) = vehicle_states(rng, 8.0);
        let e = vehicle_pair().smooth_barrier(&si, &sj, &params)?;
        let negative = e.weights.iter().fold(0.0f64, |m, &w| m.max(-w));
        Ok(Some((e.weights.iter().sum::<f64>() - 1.0).abs().max(negative)))
    }));
    checks.push(sampled("smooth_gradient_is_weighted_component_sum", 14, seed, counts.gradient_states, 1e-12, |rng| {
        let (si, sj) = vehicle_states(rng, 8.0);
        let eval = vehicle_pair().evaluate(&si, &sj)?;
        let e = smooth_h(&eval.table, &params)?;
        let mut sum = DVector::zeros(6);
        for (w, g) in e.weights.iter().zip(eval.table.gradients()) {
            sum += g * *w;
        }
        Ok(Some((sum - e.gradient()).amax() / (1.0 + e.gradient().amax())))
    }));
    checks.push(sampled("component_gradients_match_finite_differences", 15, seed, counts.gradient_states, tolerance::FINITE_DIFFERENCE, |rng| {
        let pair = vehicle_pair();
        let (si, sj) = vehicle_states(rng, 8.0);
        let x: Vec<f64> = si.iter().chain(&sj).copied().collect();
        let table = pair.evaluate(&si, &sj)?.table;
        let mut worst: f64 = 0.0;
        for (c, g) in table.gradients().enumerate() {
            let fd = finite_difference(|x| Ok(pair.evaluate(&x[..3], &x[3..])?.table.values()[c]), &x, fd_step)?;
            worst = worst.max((g - fd).amax());
        }
        Ok(Some(worst))
    }));
    checks.push(sampled("component_gradient_blocks_have_unit_translation_part", 16, seed, counts.gradient_states, 0.0, |rng| {
        let (si, sj) = vehicle_states(rng, 8.0);
        let table = vehicle_pair().evaluate(&si, &sj)?.table;
        let worst = table
            .gradients()
            .flat_map(|g| [g.rows(0, 2).norm(), g.rows(3, 2).norm()])
            .map(|n| (1.0 - tolerance::GEOMETRIC - n).max(0.0))
            .fold(0.0, f64::max);
        Ok(Some(worst))
    }));
    checks.push(sampled("h_a_matches_table_max_min", 17, seed, counts.gradient_states, 0.0, |rng| {
        let (si, sj) = vehicle_states(rng, 8.0);
        let eval = vehicle_pair().evaluate(&si, &sj)?;
        Ok(Some((h_a(&eval.table) - eval.h_a()).abs()))
    }));

    // shape Jacobians
    checks.push(sampled("rigid_jacobians_match_finite_differences", 18, seed, counts.jacobian_states, tolerance::FINITE_DIFFERENCE, |rng| {
        let shape = random_shape(rng);
        let x = random_pose(rng, 10.0).to_state();
        jacobian_fd_error(&shape, &x).map(Some)
    }));
    checks.push(sampled("translating_jacobians_match_finite_differences", 19, seed, counts.jacobian_states, tolerance::FINITE_DIFFERENCE, |rng| {
        let shape = TranslatingShape(random_shape(rng));
        let x = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        jacobian_fd_error(&shape, &x).map(Some)
    }));
    checks.push(sampled("formation_jacobians_match_finite_differences", 20, seed, counts.jacobian_states, tolerance::FINITE_DIFFERENCE, |rng| {
        let v = random_convex_vertices(rng, 3, 5.0);
        if v.len() != 3 {
            return Ok(None);
        }
        let x: Vec<f64> = v.iter().flat_map(|p| [p.x, p.y]).collect();
        jacobian_fd_error(&TriangleFormation, &x).map(Some)
    }));
    checks.push(sampled("rigid_polygons_satisfy_invariants", 21, seed, counts.jacobian_states, 0.0, |rng| {
        let shape = random_shape(rng);
        polygon_from_pose(&shape, &random_pose(rng, 10.0))?.validate()?;
        Ok(Some(0.0))
    }));

    // filters
    checks.push(sampled("single_integrator_filter_matches_kkt", 22, seed, counts.filter_instances, 1e-8, single_integrator_instance));
    checks.push(sampled("control_affine_filter_matches_kkt", 23, seed, counts.filter_instances, 1e-8, unicycle_instance));
    let crane = CraneFilter::new(
        vehicle_trapezoid(),
        vehicle_trapezoid(),
        CraneModel::default(),
        Matrix2::new(1000.0, 0.0, 0.0, 2.0),
        3.0,
        500.0,
        CbfParams::new(5.0, 8.0),
    )
    .expect("valid crane filter");
    checks.push(sampled("crane_filter_matches_kkt", 24, seed, counts.filter_instances, 1e-8, |rng| {
        crane_filter_instance(rng, &crane)
    }));

    // crane dynamics
    checks.push(sampled("crane_formulations_agree", 25, seed, counts.crane_states, 1e-9, |rng| {
        let model = CraneModel::default();
        let s = random_crane_state(rng);
        let u = Vector2::new(rng.random_range(-100.0..100.0), rng.random_range(0.0..300.0));
        Ok(Some((crane_accelerations(&s, &u, &model) - crane_accelerations_transformed(&s, &u, &model)).amax()))
    }));
    checks.push(sampled("crane_equilibrium_is_stationary", 26, seed, counts.crane_states, 1e-12, |rng| {
        let model = CraneModel::default();
        let s = CraneState::at_rest(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 0.0);
        let u = Vector2::new(0.0, (model.big_m + model.m) * model.g);
        let next = rk4_step(|x| crane_derivative(&CraneState::from_vector(x), &u, &model), &s.to_vector(), 1e-3);
        Ok(Some((next - s.to_vector()).amax()))
    }));

    let passed = checks.iter().all(|c| c.passed);
    VerifyReport {
        seed,
        counts: *counts,
        passed,
        checks,
    }
}
