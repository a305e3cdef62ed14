//! Numerical tolerances shared by validators and property checks.

/// Geometric predicates: vertex-on-halfspace, collinearity, hull pruning.
pub const GEOMETRIC: f64 = 1e-9;

/// Allowed deviation of an outward normal from unit length.
pub const UNIT_NORM: f64 = 1e-12;

/// Step used for central finite differences and the agreement it must reach.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-6;
pub const FINITE_DIFFERENCE: f64 = 1e-6;

/// Below this norm a gradient is treated as vanished.
pub const SINGULAR_GRADIENT: f64 = 1e-12;

/// Convex-combination weights must sum to one within this.
pub const WEIGHT_SUM: f64 = 1e-12;

/// Default denominator regularizer of the closed-form filters.
pub const DEFAULT_FILTER_EPSILON: f64 = 1e-9;
