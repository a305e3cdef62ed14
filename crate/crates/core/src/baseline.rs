//! SDF-linearized barrier with nearest points found by enumerating sampled
//! polygon boundaries. Used only as the comparison method.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSample;
use crate::error::{Error, Result};
use crate::filter::{filter_control_affine, AffineAgent, FilterConfig, FilterResult};
use crate::geometry::{polygon_from_pose, quarter_turn, rotation, PlanarPose, RigidPolygonShape, Vec2};
use crate::sdf::nearest_boundary_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub samples_per_edge: usize,
}

impl BaselineConfig {
    pub fn new(samples_per_edge: usize) -> Result<Self> {
        if samples_per_edge < 2 {
            return Err(Error::InvalidParameter(format!(
                "samples_per_edge must be at least 2, got {samples_per_edge}"
            )));
        }
        Ok(Self { samples_per_edge })
    }
}

/// Approximate signed distance and its linearized gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEval {
    pub value: f64,
    pub grad_xi: DVector<f64>,
    pub grad_xj: DVector<f64>,
    pub witness_i: Vec2,
    pub witness_j: Vec2,
    pub direction: Vec2,
}

impl BarrierSample for BaselineEval {
    fn value(&self) -> f64 {
        self.value
    }
    fn grad_xi(&self) -> &DVector<f64> {
        &self.grad_xi
    }
    fn grad_xj(&self) -> &DVector<f64> {
        &self.grad_xj
    }
}

/// `∇_{x} h ≈ ±[â, âᵀ R(θ + π/2) ĝ]` with `ĝ` the body-frame witness.
fn linearized_gradient(direction: &Vec2, pose: &PlanarPose, witness: &Vec2, sign: f64) -> DVector<f64> {
    let body = rotation(pose.theta).transpose() * (witness - pose.p);
    let lever = quarter_turn(&(rotation(pose.theta) * body));
    DVector::from_column_slice(&[
        sign * direction.x,
        sign * direction.y,
        sign * direction.dot(&lever),
    ])
}

pub fn baseline_h_and_gradient(
    pose_i: &PlanarPose,
    pose_j: &PlanarPose,
    shape_i: &RigidPolygonShape,
    shape_j: &RigidPolygonShape,
    cfg: &BaselineConfig,
) -> Result<BaselineEval> {
    let pi = polygon_from_pose(shape_i, pose_i)?;
    let pj = polygon_from_pose(shape_j, pose_j)?;
    let nearest = nearest_boundary_points(&pi, &pj, cfg.samples_per_edge)?;
    let gap = nearest.witness_j - nearest.witness_i;
    if nearest.distance == 0.0 {
        return Err(Error::Overlap);
    }
    let direction = gap / nearest.distance;
    Ok(BaselineEval {
        value: direction.dot(&gap),
        grad_xi: linearized_gradient(&direction, pose_i, &nearest.witness_i, -1.0),
        grad_xj: linearized_gradient(&direction, pose_j, &nearest.witness_j, 1.0),
        witness_i: nearest.witness_i,
        witness_j: nearest.witness_j,
        direction,
    })
}

/// Same contract as [`filter_control_affine`] with the baseline barrier.
pub fn baseline_filter_step(
    agents: &[AffineAgent; 2],
    barrier: &BaselineEval,
    cfg: &FilterConfig,
) -> Result<FilterResult> {
    filter_control_affine(agents, barrier, cfg)
}
