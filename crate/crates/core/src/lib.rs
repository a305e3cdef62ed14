//! Optimization-free smooth control barrier functions for collision avoidance
//! between convex polygons.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: convex polygons in H- and V-representation, pose-parameterized
//!   shapes with closed-form Jacobians, Minkowski differences.
//! - [`sdf`]: exact signed distance between convex polygons (the ground truth).
//! - [`barrier`]: the nonsmooth max-min lower bound `h_a`, its log-sum-exp
//!   smoothing `ĥ_a` and the gradient of the smoothed barrier.
//! - [`filter`]: closed-form CBF-QP safety filters.
//! - [`dynamics`]: unicycle and container-crane models, nominal controllers, RK4.
//! - [`baseline`]: the sampled-boundary SDF-linearized barrier used for comparison.
//! - [`scenario`]: configuration, simulation loop, benchmark and property suite.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod barrier;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod scenario;
pub mod sdf;
pub mod tolerance;

pub use barrier::{
    component_table, error_bound, h_a, smooth_h, BarrierEval, CbfParams, ComponentTable,
    PairModel,
};
pub use error::{Error, Result};
pub use geometry::{
    formation_polygon, minkowski_difference_vertices, polygon_from_pose, shape_jacobians,
    support_value, ConvexPolygon, PlanarPose, PolygonModel, RigidPolygonShape, ShapeJacobians,
    TranslatingShape, TriangleFormation, Vec2,
};
pub use sdf::{distance_point_to_boundary, nearest_boundary_points, signed_distance, SdfResult};
