//! System models for the two case studies and a fixed-step integrator.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, SVector, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation, Vec2};

/// One classical Runge-Kutta step with the input held constant over `dt`.
pub fn rk4_step<const N: usize, F>(derivative: F, state: &SVector<f64, N>, dt: f64) -> SVector<f64, N>
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
{
    let k1 = derivative(state);
    let k2 = derivative(&(state + k1 * (dt / 2.0)));
    let k3 = derivative(&(state + k2 * (dt / 2.0)));
    let k4 = derivative(&(state + k3 * dt));
    state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

// ───────────────────────── unicycle ─────────────────────────

/// Planar pose of a kinematic vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleState {
    pub p_x: f64,
    pub p_y: f64,
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(p_x: f64, p_y: f64, theta: f64) -> Self {
        Self { p_x, p_y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.p_x, self.p_y)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.p_x, self.p_y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Input matrix `g(x)` of `ẋ = g(x) (v, ω)`.
    pub fn input_matrix(&self) -> Matrix3x2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3x2::new(c, 0.0, s, 0.0, 0.0, 1.0)
    }
}

/// `(v cos θ, v sin θ, ω)`
pub fn unicycle_derivative(state: &UnicycleState, input: &Vector2<f64>) -> Vector3<f64> {
    state.input_matrix() * input
}

/// Near-identity tracking law `(v, ω) = L R(θ)ᵀ (−K (p − p_d) + ṗ_d)` with
/// `L = diag(1, 1/l)`.
pub fn unicycle_tracking_controller(
    state: &UnicycleState,
    desired_p: &Vec2,
    desired_p_dot: &Vec2,
    gain: &Matrix2<f64>,
    l_offset: f64,
) -> Result<Vector2<f64>> {
    if l_offset == 0.0 || !l_offset.is_finite() {
        return Err(Error::InvalidParameter("tracking offset l must be nonzero".into()));
    }
    let command = -gain * (state.position() - desired_p) + desired_p_dot;
    let body = rotation(state.theta).transpose() * command;
    Ok(Vector2::new(body.x, body.y / l_offset))
}

/// Ellipse `(a_x sin(ωt + φ), a_y cos(ωt + φ))` and its velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticTrajectory {
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub rate: f64,
    pub phase: f64,
}

impl EllipticTrajectory {
    pub fn position(&self, t: f64) -> Vec2 {
        let (s, c) = (self.rate * t + self.phase).sin_cos();
        Vec2::new(self.amplitude_x * s, self.amplitude_y * c)
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        let (s, c) = (self.rate * t + self.phase).sin_cos();
        Vec2::new(self.amplitude_x * self.rate * c, -self.amplitude_y * self.rate * s)
    }
}

// ───────────────────────── crane ─────────────────────────

/// Cart mass `M`, load mass `m`, gravity `g`, rope length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraneModel {
    #[serde(rename = "cart_mass")]
    pub big_m: f64,
    #[serde(rename = "load_mass")]
    pub m: f64,
    pub g: f64,
    #[serde(rename = "rope_length")]
    pub l: f64,
}

impl Default for CraneModel {
    fn default() -> Self {
        Self {
            big_m: 10.0,
            m: 5.0,
            g: 9.8,
            l: 0.7,
        }
    }
}

/// Cart position, swing angle and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraneState {
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub y_dot: f64,
    pub z_dot: f64,
    pub theta_dot: f64,
}

impl CraneState {
    pub fn at_rest(y: f64, z: f64, theta: f64) -> Self {
        Self::from_vector(&Vector6::new(y, z, theta, 0.0, 0.0, 0.0))
    }

    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::new(self.y, self.z, self.theta, self.y_dot, self.z_dot, self.theta_dot)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            y: v[0],
            z: v[1],
            theta: v[2],
            y_dot: v[3],
            z_dot: v[4],
            theta_dot: v[5],
        }
    }

    /// Container centre `p^i = (y + l sin θ, z − l cos θ)`.
    pub fn load_position(&self, model: &CraneModel) -> Vec2 {
        Vec2::new(self.y + model.l * self.theta.sin(), self.z - model.l * self.theta.cos())
    }

    pub fn load_velocity(&self, model: &CraneModel) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(
            self.y_dot + model.l * c * self.theta_dot,
            self.z_dot + model.l * s * self.theta_dot,
        )
    }

    /// Transformed coordinates `p = (p^i, θ)`.
    pub fn transformed(&self, model: &CraneModel) -> Vector3<f64> {
        let p = self.load_position(model);
        Vector3::new(p.x, p.y, self.theta)
    }

    pub fn transformed_rate(&self, model: &CraneModel) -> Vector3<f64> {
        let v = self.load_velocity(model);
        Vector3::new(v.x, v.y, self.theta_dot)
    }
}

impl CraneModel {
    pub fn validate(&self) -> Result<()> {
        if [self.big_m, self.m, self.g, self.l].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Model("crane parameters must be positive".into()))
        }
    }

    fn total_mass(&self) -> f64 {
        self.big_m + self.m
    }

    /// Mass matrix of the cart/swing coordinates `(y, z, θ)`.
    pub fn mass_matrix(&self, theta: f64) -> Matrix3<f64> {
        let (s, c) = theta.sin_cos();
        let ml = self.m * self.l;
        let t = self.total_mass();
        Matrix3::new(t, 0.0, ml * c, 0.0, t, ml * s, ml * c, ml * s, ml * self.l)
    }

    /// `M_T(θ)` of the transformed coordinates.
    pub fn transformed_mass_matrix(&self, theta: f64) -> Matrix3<f64> {
        let (s, c) = theta.sin_cos();
        let ml = self.big_m * self.l;
        let t = self.total_mass();
        Matrix3::new(t, 0.0, -ml * c, 0.0, t, -ml * s, -ml * c, -ml * s, ml * self.l)
    }

    /// `C_T(θ, θ̇)`
    pub fn transformed_coriolis(&self, theta: f64, theta_dot: f64) -> Matrix3<f64> {
        let (s, c) = theta.sin_cos();
        let ml = self.big_m * self.l * theta_dot;
        Matrix3::new(0.0, 0.0, ml * s, 0.0, 0.0, -ml * c, 0.0, 0.0, 0.0)
    }

    /// `G_T(θ)`
    pub fn transformed_gravity(&self, theta: f64) -> Vector3<f64> {
        Vector3::new(0.0, self.total_mass() * self.g, -self.big_m * self.g * self.l * theta.sin())
    }

    /// `B_T(θ)`
    pub fn transformed_input(&self, theta: f64) -> Matrix3x2<f64> {
        let (s, c) = theta.sin_cos();
        Matrix3x2::new(1.0, 0.0, 0.0, 1.0, -self.l * c, -self.l * s)
    }

    /// Kinetic plus swing potential energy, excluding the cart's gravity term:
    /// conserved when the input exactly compensates `(M + m) g`.
    pub fn compensated_energy(&self, state: &CraneState) -> f64 {
        let q_dot = Vector3::new(state.y_dot, state.z_dot, state.theta_dot);
        0.5 * q_dot.dot(&(self.mass_matrix(state.theta) * q_dot))
            - self.m * self.g * self.l * state.theta.cos()
    }
}

/// Accelerations `(ÿ, z̈, θ̈)` from the Euler-Lagrange equations.
pub fn crane_accelerations(state: &CraneState, input: &Vector2<f64>, model: &CraneModel) -> Vector3<f64> {
    let (s, c) = state.theta.sin_cos();
    let ml = model.m * model.l;
    let w2 = state.theta_dot * state.theta_dot;
    let rhs = Vector3::new(
        input.x + ml * w2 * s,
        input.y - model.total_mass() * model.g - ml * w2 * c,
        -model.m * model.g * model.l * s,
    );
    model
        .mass_matrix(state.theta)
        .lu()
        .solve(&rhs)
        .expect("crane mass matrix is nonsingular for positive parameters")
}

/// Accelerations computed in the transformed coordinates and mapped back.
pub fn crane_accelerations_transformed(
    state: &CraneState,
    input: &Vector2<f64>,
    model: &CraneModel,
) -> Vector3<f64> {
    let p_dot = state.transformed_rate(model);
    let rhs = model.transformed_input(state.theta) * input
        - model.transformed_coriolis(state.theta, state.theta_dot) * p_dot
        - model.transformed_gravity(state.theta);
    let p_ddot = model
        .transformed_mass_matrix(state.theta)
        .lu()
        .solve(&rhs)
        .expect("transformed mass matrix is nonsingular for positive parameters");
    let (s, c) = state.theta.sin_cos();
    let w2 = state.theta_dot * state.theta_dot;
    Vector3::new(
        p_ddot.x - model.l * c * p_ddot.z + model.l * s * w2,
        p_ddot.y - model.l * s * p_ddot.z - model.l * c * w2,
        p_ddot.z,
    )
}

/// Full first-order state derivative.
pub fn crane_derivative(state: &CraneState, input: &Vector2<f64>, model: &CraneModel) -> Vector6<f64> {
    let acc = crane_accelerations(state, input, model);
    Vector6::new(state.y_dot, state.z_dot, state.theta_dot, acc.x, acc.y, acc.z)
}

/// Gains and target of the saturated PD stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CranePdGains {
    pub kp: Matrix2<f64>,
    pub kd: Matrix2<f64>,
    pub lambda: f64,
}

/// `u₀ = −K_p tanh(χ − χ_d) − K_d tanh(χ̇) + (M + m) g e₂`
pub fn crane_pd_controller(
    state: &CraneState,
    target: &Vec2,
    gains: &CranePdGains,
    model: &CraneModel,
) -> Vector2<f64> {
    let (s, c) = state.theta.sin_cos();
    let lambda = gains.lambda;
    let chi = Vector2::new(state.y + lambda * s, state.z - lambda * c);
    let chi_d = Vector2::new(target.x, target.y - lambda);
    let chi_dot = Vector2::new(
        state.y_dot + lambda * state.theta_dot * c,
        state.z_dot + lambda * state.theta_dot * s,
    );
    -gains.kp * (chi - chi_d).map(f64::tanh) - gains.kd * chi_dot.map(f64::tanh)
        + Vector2::new(0.0, model.total_mass() * model.g)
}
