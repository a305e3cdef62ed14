//! Closed-form CBF-QP safety filters.
//!
//! Each filter solves a QP with one affine constraint per agent, so the
//! minimizer is either the nominal input (constraint inactive) or the nominal
//! input shifted along the constraint normal by exactly the violation.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::barrier::{BarrierEval, BarrierSample, CbfParams, PairModel};
use crate::dynamics::{CraneModel, CraneState};
use crate::error::{Error, Result};
use crate::geometry::{RigidPolygonShape, TranslatingShape, Vec2};
use crate::tolerance;

/// Share of the class-K budget each agent enforces.
pub const AGENT_SPLIT: f64 = 0.5;

/// Linear class-K gain and denominator regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    #[serde(rename = "alpha")]
    pub alpha_gain: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    tolerance::DEFAULT_FILTER_EPSILON
}

impl FilterConfig {
    pub fn new(alpha_gain: f64) -> Self {
        Self {
            alpha_gain,
            epsilon: default_epsilon(),
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Per-agent share of the class-K budget; fixed.
    pub fn split(&self) -> f64 {
        AGENT_SPLIT
    }

    pub fn alpha(&self, h: f64) -> f64 {
        self.alpha_gain * h
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_gain > 0.0 && self.alpha_gain.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha_gain)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Filtered input together with the per-agent constraint slack.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u_star: Vec<DVector<f64>>,
    /// `η > 0` means the nominal input violates that agent's constraint.
    pub eta: Vec<f64>,
    pub active: Vec<bool>,
    /// Smallest `lhs − rhs` of the enforced inequalities at `u_star`.
    pub constraint_residual: f64,
    /// ε moved some correction by more than 1e-6 relative.
    pub epsilon_distorted: bool,
}

/// Shifts `u0` along `c` by `η / (‖c‖² + ε)` when `η > 0`.
fn correct_along(
    u0: &DVector<f64>,
    c: &DVector<f64>,
    eta: f64,
    epsilon: f64,
    agent: usize,
) -> Result<(DVector<f64>, bool)> {
    if eta <= 0.0 {
        return Ok((u0.clone(), false));
    }
    let c2 = c.norm_squared();
    if epsilon == 0.0 && c.norm() < tolerance::SINGULAR_GRADIENT {
        return Err(Error::SingularGradient { agent });
    }
    let distorted = epsilon > 1e-6 * c2;
    Ok((u0 + c * (eta / (c2 + epsilon)), distorted))
}

/// Distributed filter for `ẋ^𝔦 = u^𝔦`.
pub fn filter_single_integrator(
    u0_i: &DVector<f64>,
    u0_j: &DVector<f64>,
    barrier: &impl BarrierSample,
    cfg: &FilterConfig,
) -> Result<FilterResult> {
    let agents = [
        AffineAgent::single_integrator(u0_i.clone()),
        AffineAgent::single_integrator(u0_j.clone()),
    ];
    filter_control_affine(&agents, barrier, cfg)
}

/// One agent of `ẋ^𝔦 = f^𝔦 + g^𝔦 u^𝔦` with its nominal input.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineAgent {
    pub drift: DVector<f64>,
    pub input_matrix: DMatrix<f64>,
    pub nominal: DVector<f64>,
}

impl AffineAgent {
    pub fn single_integrator(nominal: DVector<f64>) -> Self {
        let n = nominal.len();
        Self {
            drift: DVector::zeros(n),
            input_matrix: DMatrix::identity(n, n),
            nominal,
        }
    }
}

/// Distributed filter for control-affine agents.
pub fn filter_control_affine(
    agents: &[AffineAgent; 2],
    barrier: &impl BarrierSample,
    cfg: &FilterConfig,
) -> Result<FilterResult> {
    cfg.validate()?;
    let budget = cfg.split() * cfg.alpha(barrier.value());
    let mut result = FilterResult {
        u_star: Vec::with_capacity(2),
        eta: Vec::with_capacity(2),
        active: Vec::with_capacity(2),
        constraint_residual: f64::INFINITY,
        epsilon_distorted: false,
    };
    for (idx, agent) in agents.iter().enumerate() {
        let grad = barrier.grad(idx);
        let g = &agent.input_matrix;
        if g.nrows() != grad.len() || agent.drift.len() != grad.len() || g.ncols() != agent.nominal.len() {
            return Err(Error::InvalidParameter(format!(
                "agent {idx}: dynamics dimensions do not match the barrier gradient"
            )));
        }
        if !well_conditioned_gram(g) {
            return Err(Error::NotPositiveDefinite("gᵀg"));
        }
        let c = g.tr_mul(grad);
        let eta = -grad.dot(&(&agent.drift + g * &agent.nominal)) - budget;
        let (u, distorted) = correct_along(&agent.nominal, &c, eta, cfg.epsilon, idx)?;
        let residual = grad.dot(&(&agent.drift + g * &u)) + budget;
        result.constraint_residual = result.constraint_residual.min(residual);
        result.epsilon_distorted |= distorted;
        result.u_star.push(u);
        result.eta.push(eta);
        result.active.push(eta > 0.0);
    }
    Ok(result)
}

// ───────────────────────── crane ─────────────────────────

/// Smallest eigenvalue of `gᵀg` above a relative floor.
fn well_conditioned_gram(g: &DMatrix<f64>) -> bool {
    let gram = g.tr_mul(g);
    let eig = gram.symmetric_eigenvalues();
    let max = eig.max();
    max > 0.0 && eig.min() > tolerance::SINGULAR_GRADIENT * max
}

/// `φ = η ĥ_a − ½ ṗᵀ M_T ṗ`
pub fn crane_energy_barrier(
    p_dot: &Vector3<f64>,
    h_hat: f64,
    eta_gain: f64,
    mass_matrix: &Matrix3<f64>,
) -> Result<f64> {
    if mass_matrix.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("M_T"));
    }
    Ok(eta_gain * h_hat - 0.5 * p_dot.dot(&(mass_matrix * p_dot)))
}

/// Time derivative of the energy barrier along the crane dynamics,
/// `φ̇ = −(ẏ, ż)·u + η (∇_{p^i}ĥ·ṗ^i + ∇_{p^j}ĥ·ṗ^j) + ṗᵀ G_T`.
pub fn crane_energy_barrier_rate(
    state: &CraneState,
    input: &Vector2<f64>,
    obstacle_velocity: &Vec2,
    barrier: &impl BarrierSample,
    eta_gain: f64,
    model: &CraneModel,
) -> f64 {
    let (c, d0) = crane_constraint_terms(state, obstacle_velocity, barrier, eta_gain, model);
    c.dot(input) + d0
}

/// Splits `φ̇ = cᵀu + d₀`.
fn crane_constraint_terms(
    state: &CraneState,
    obstacle_velocity: &Vec2,
    barrier: &impl BarrierSample,
    eta_gain: f64,
    model: &CraneModel,
) -> (Vector2<f64>, f64) {
    let c = Vector2::new(-state.y_dot, -state.z_dot);
    let load_velocity = state.load_velocity(model);
    let gi = barrier.grad_xi();
    let gj = barrier.grad_xj();
    let h_dot = gi[0] * load_velocity.x
        + gi[1] * load_velocity.y
        + gj[0] * obstacle_velocity.x
        + gj[1] * obstacle_velocity.y;
    let p_dot = state.transformed_rate(model);
    let d0 = eta_gain * h_dot + p_dot.dot(&model.transformed_gravity(state.theta));
    (c, d0)
}

/// Solves `min (u − u₀)ᵀQ(u − u₀)` s.t. `cᵀu ≥ d` in closed form.
/// Returns `(u*, slack)` with `slack = d − cᵀu₀`.
pub fn weighted_single_constraint(
    u0: &Vector2<f64>,
    q: &Matrix2<f64>,
    c: &Vector2<f64>,
    d: f64,
    epsilon: f64,
) -> Result<(Vector2<f64>, f64)> {
    let q_inv = q
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("Q"))?
        .inverse();
    let slack = d - c.dot(u0);
    if slack <= 0.0 {
        return Ok((*u0, slack));
    }
    let q_inv_c = q_inv * c;
    let denom = c.dot(&q_inv_c);
    if denom < tolerance::SINGULAR_GRADIENT {
        return Err(Error::DegenerateConstraint);
    }
    Ok((u0 + q_inv_c * (slack / (denom + epsilon)), slack))
}

/// Moving obstacle observed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub velocity: Vec2,
}

/// Energy-CBF filter of the container crane against one moving obstacle.
pub struct CraneFilter {
    pub pair: PairModel,
    pub model: CraneModel,
    pub q_weight: Matrix2<f64>,
    pub alpha: f64,
    pub eta_gain: f64,
    pub params: CbfParams,
}

/// Filter output plus the quantities it was computed from.
#[derive(Debug, Clone)]
pub struct CraneFilterOutput {
    pub result: FilterResult,
    pub barrier: BarrierEval,
    pub phi: f64,
}

impl CraneFilter {
    pub fn new(
        container: RigidPolygonShape,
        obstacle: RigidPolygonShape,
        model: CraneModel,
        q_weight: Matrix2<f64>,
        alpha: f64,
        eta_gain: f64,
        params: CbfParams,
    ) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        if q_weight.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Q"));
        }
        if !(alpha > 0.0 && eta_gain > 0.0) {
            return Err(Error::InvalidParameter("alpha and eta must be positive".into()));
        }
        Ok(Self {
            pair: PairModel::new(TranslatingShape(container), TranslatingShape(obstacle)),
            model,
            q_weight,
            alpha,
            eta_gain,
            params,
        })
    }

    /// `ĥ_a` between the container at the load position and the obstacle.
    pub fn barrier(&self, state: &CraneState, obstacle: &Obstacle) -> Result<BarrierEval> {
        let p = state.load_position(&self.model);
        self.pair
            .smooth_barrier(&[p.x, p.y], &[obstacle.center.x, obstacle.center.y], &self.params)
    }

    pub fn energy_barrier(&self, state: &CraneState, barrier: &BarrierEval) -> Result<f64> {
        crane_energy_barrier(
            &state.transformed_rate(&self.model),
            barrier.value,
            self.eta_gain,
            &self.model.transformed_mass_matrix(state.theta),
        )
    }

    /// Filters `u0`; an active constraint with vanishing `(ẏ, ż)` is an error.
    pub fn filter(&self, u0: &Vector2<f64>, state: &CraneState, obstacle: &Obstacle) -> Result<CraneFilterOutput> {
        let barrier = self.barrier(state, obstacle)?;
        self.filter_with(u0, state, obstacle, barrier)
    }

    /// [`Self::filter`] with a barrier evaluated by the caller.
    pub fn filter_with(
        &self,
        u0: &Vector2<f64>,
        state: &CraneState,
        obstacle: &Obstacle,
        barrier: BarrierEval,
    ) -> Result<CraneFilterOutput> {
        let phi = self.energy_barrier(state, &barrier)?;
        let (c, d0) = crane_constraint_terms(state, &obstacle.velocity, &barrier, self.eta_gain, &self.model);
        // cᵀu + d₀ ≥ −αφ
        let d = -self.alpha * phi - d0;
        let (u, slack) = weighted_single_constraint(u0, &self.q_weight, &c, d, self.params.epsilon)?;
        let distorted = slack > 0.0 && {
            let q_inv = self.q_weight.try_inverse().unwrap_or_else(Matrix2::identity);
            self.params.epsilon > 1e-6 * c.dot(&(q_inv * c))
        };
        let result = FilterResult {
            u_star: vec![DVector::from_column_slice(u.as_slice())],
            eta: vec![slack],
            active: vec![slack > 0.0],
            constraint_residual: c.dot(&u) - d,
            epsilon_distorted: distorted,
        };
        Ok(CraneFilterOutput { result, barrier, phi })
    }
}
