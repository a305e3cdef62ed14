//! The optimization-free barrier: the nonsmooth lower bound `h_a` of the signed
//! distance, and its log-sum-exp smoothing `ĥ_a`.
//!
//! Every facet normal of the Minkowski difference `P^j − P^i` is either `−A^i_k`
//! or `A^j_k`, so the signed distance restricted to those normals reduces to the
//! component values
//!
//! ```text
//! φ[k][l] = A^iₖ · v^jₗ − b^iₖ      (edges k of P^i, vertices l of P^j)
//! ψ[k][l] = A^jₖ · v^iₗ − b^jₖ      (edges k of P^j, vertices l of P^i)
//! h_a     = max( maxₖ minₗ φ, maxₖ minₗ ψ )
//! ```
//!
//! The smoothed barrier replaces the inner minima by soft-minima and the outer
//! maxima by one soft-maximum with sharpness `κ`, shifted down by `b/κ`.
//! Evaluation happens in the log domain with max/min shifts so that only
//! non-positive numbers are exponentiated.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, PolygonModel, ShapeJacobians};
use crate::tolerance;

/// Smoothing sharpness `κ`, buffer `b` and the filter's gradient regularizer `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfParams {
    pub kappa: f64,
    #[serde(rename = "buffer")]
    pub buffer_b: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    tolerance::DEFAULT_FILTER_EPSILON
}

impl CbfParams {
    pub fn new(kappa: f64, buffer_b: f64) -> Self {
        Self {
            kappa,
            buffer_b,
            epsilon: default_epsilon(),
        }
    }

    /// Buffer `ln(r^i + r^j)`, the smallest one that keeps `ĥ_a ≤ h_a`.
    pub fn under_approximating(kappa: f64, r_i: usize, r_j: usize) -> Self {
        Self::new(kappa, ((r_i + r_j) as f64).ln())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !self.buffer_b.is_finite() {
            return Err(Error::InvalidParameter("buffer must be finite".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Whether `b ≥ ln(r^i + r^j)` holds for the given edge counts.
    pub fn under_approximates(&self, r_i: usize, r_j: usize) -> bool {
        self.buffer_b >= ((r_i + r_j) as f64).ln()
    }
}

/// All atomic components of `h_a` and their gradients in the stacked state
/// `x = (x^i, x^j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    /// `r^i × r^j`
    pub phi: DMatrix<f64>,
    /// `r^j × r^i`
    pub psi: DMatrix<f64>,
    /// Row-major over `phi`, each of length `n_i + n_j`.
    pub grad_phi: Vec<DVector<f64>>,
    /// Row-major over `psi`.
    pub grad_psi: Vec<DVector<f64>>,
    pub n_i: usize,
    pub n_j: usize,
}

impl ComponentTable {
    pub fn r_i(&self) -> usize {
        self.phi.nrows()
    }

    pub fn r_j(&self) -> usize {
        self.psi.nrows()
    }

    pub fn component_count(&self) -> usize {
        self.grad_phi.len() + self.grad_psi.len()
    }

    /// Component values in weight order: `phi` row-major, then `psi` row-major.
    pub fn values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.phi.transpose().iter().copied().collect();
        out.extend(self.psi.transpose().iter().copied());
        out
    }

    /// Gradients in the same order as [`values`](Self::values).
    pub fn gradients(&self) -> impl Iterator<Item = &DVector<f64>> + '_ {
        self.grad_phi.iter().chain(&self.grad_psi)
    }

    pub fn min_gradient_norm(&self) -> f64 {
        self.gradients().map(|g| g.norm()).fold(f64::INFINITY, f64::min)
    }
}

fn check_jacobians(poly: &ConvexPolygon, jac: &ShapeJacobians, side: &str) -> Result<usize> {
    let r = poly.len();
    if jac.d_normals.len() != r || jac.d_offsets.len() != r || jac.d_vertices.len() != r {
        return Err(Error::JacobianMismatch(format!(
            "polygon {side} has {r} edges but jacobians list {} / {} / {}",
            jac.d_normals.len(),
            jac.d_offsets.len(),
            jac.d_vertices.len()
        )));
    }
    let n = jac.state_dim();
    let consistent = jac.d_normals.iter().all(|m| m.ncols() == n)
        && jac.d_offsets.iter().all(|m| m.ncols() == n)
        && jac.d_vertices.iter().all(|m| m.ncols() == n);
    if !consistent || n == 0 {
        return Err(Error::JacobianMismatch(format!("polygon {side}: inconsistent state dimension")));
    }
    Ok(n)
}

/// One table half: rows are edges of `owner`, columns vertices of `other`.
/// Gradients are stacked as `(x^i, x^j)`; `owner_is_i` says which block the
/// owner's state occupies.
fn half_table(
    owner: &ConvexPolygon,
    owner_jac: &ShapeJacobians,
    other: &ConvexPolygon,
    other_jac: &ShapeJacobians,
    owner_is_i: bool,
) -> (DMatrix<f64>, Vec<DVector<f64>>) {
    let rows = owner.len();
    let cols = other.len();
    let (n_own, n_oth) = (owner_jac.state_dim(), other_jac.state_dim());
    let (own_at, oth_at) = if owner_is_i { (0, n_own) } else { (n_oth, 0) };
    let mut values = DMatrix::zeros(rows, cols);
    let mut grads = Vec::with_capacity(rows * cols);
    for k in 0..rows {
        let a = owner.normals()[k];
        let b = owner.offsets()[k];
        let d_a = &owner_jac.d_normals[k];
        let d_b = &owner_jac.d_offsets[k];
        for l in 0..cols {
            let v = other.vertices()[l];
            values[(k, l)] = a.dot(&v) - b;
            // (∂A)ᵀ v − ∇b  and  (∂v)ᵀ A
            let d_v = &other_jac.d_vertices[l];
            let mut g = DVector::zeros(n_own + n_oth);
            for c in 0..n_own {
                g[own_at + c] = d_a[(0, c)] * v.x + d_a[(1, c)] * v.y - d_b[c];
            }
            for c in 0..n_oth {
                g[oth_at + c] = d_v[(0, c)] * a.x + d_v[(1, c)] * a.y;
            }
            grads.push(g);
        }
    }
    (values, grads)
}

fn stack(first: &DVector<f64>, second: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(first.len() + second.len());
    out.rows_mut(0, first.len()).copy_from(first);
    out.rows_mut(first.len(), second.len()).copy_from(second);
    out
}

/// Builds every `φ`, `ψ` component and its gradient.
pub fn component_table(
    pi: &ConvexPolygon,
    jac_i: &ShapeJacobians,
    pj: &ConvexPolygon,
    jac_j: &ShapeJacobians,
) -> Result<ComponentTable> {
    let n_i = check_jacobians(pi, jac_i, "i")?;
    let n_j = check_jacobians(pj, jac_j, "j")?;
    let (phi, grad_phi) = half_table(pi, jac_i, pj, jac_j, true);
    let (psi, grad_psi) = half_table(pj, jac_j, pi, jac_i, false);
    Ok(ComponentTable {
        phi,
        psi,
        grad_phi,
        grad_psi,
        n_i,
        n_j,
    })
}

fn row_min(m: &DMatrix<f64>, k: usize) -> f64 {
    m.row(k).iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max( maxₖ minₗ φ, maxₖ minₗ ψ )`
pub fn h_a(table: &ComponentTable) -> f64 {
    let phi = (0..table.phi.nrows()).map(|k| row_min(&table.phi, k));
    let psi = (0..table.psi.nrows()).map(|k| row_min(&table.psi, k));
    phi.chain(psi).fold(f64::NEG_INFINITY, f64::max)
}

/// Smoothed barrier value with its gradient in the stacked state.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval {
    pub value: f64,
    pub grad_xi: DVector<f64>,
    pub grad_xj: DVector<f64>,
    /// Convex-combination weight of every component gradient, in
    /// [`ComponentTable::values`] order.
    pub weights: Vec<f64>,
}

impl BarrierEval {
    pub fn gradient(&self) -> DVector<f64> {
        stack(&self.grad_xi, &self.grad_xj)
    }
}

/// Anything a closed-form filter can consume: a barrier value and its
/// gradient split by agent.
pub trait BarrierSample {
    fn value(&self) -> f64;
    fn grad_xi(&self) -> &DVector<f64>;
    fn grad_xj(&self) -> &DVector<f64>;

    fn grad(&self, agent: usize) -> &DVector<f64> {
        if agent == 0 {
            self.grad_xi()
        } else {
            self.grad_xj()
        }
    }
}

impl BarrierSample for BarrierEval {
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

/// Soft-minimum of one table row: returns `s = m − (1/κ) ln Σ exp(−κ(xₗ − m))`
/// with `m = min x`, and writes the normalized weights into `w`.
fn soft_min_row(row: impl Iterator<Item = f64> + Clone, kappa: f64, w: &mut Vec<f64>) -> f64 {
    let m = row.clone().fold(f64::INFINITY, f64::min);
    let start = w.len();
    let mut sum = 0.0;
    for x in row {
        let e = (-kappa * (x - m)).exp();
        sum += e;
        w.push(e);
    }
    for e in &mut w[start..] {
        *e /= sum;
    }
    m - sum.ln() / kappa
}

/// Evaluates `ĥ_a` and `∇ĥ_a` in shifted log-domain form.
pub fn smooth_h(table: &ComponentTable, params: &CbfParams) -> Result<BarrierEval> {
    params.validate()?;
    let kappa = params.kappa;
    let rows = table.phi.nrows() + table.psi.nrows();

    let mut inner_weights = Vec::with_capacity(table.component_count());
    let mut soft = Vec::with_capacity(rows);
    let mut spans = Vec::with_capacity(rows);
    for (m, k) in (0..table.phi.nrows())
        .map(|k| (&table.phi, k))
        .chain((0..table.psi.nrows()).map(|k| (&table.psi, k)))
    {
        let start = inner_weights.len();
        soft.push(soft_min_row(m.row(k).iter().copied(), kappa, &mut inner_weights));
        spans.push(start..inner_weights.len());
    }

    // Outer soft-max over the row soft-minima.
    let top = soft.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let outer: Vec<f64> = soft.iter().map(|s| (kappa * (s - top)).exp()).collect();
    let outer_sum: f64 = outer.iter().sum();
    let value = top + outer_sum.ln() / kappa - params.buffer_b / kappa;

    let mut weights = inner_weights;
    for (span, o) in spans.iter().zip(&outer) {
        for w in &mut weights[span.clone()] {
            *w *= o / outer_sum;
        }
    }

    let mut grad = DVector::zeros(table.n_i + table.n_j);
    for (w, g) in weights.iter().zip(table.gradients()) {
        grad.axpy(*w, g, 1.0);
    }
    Ok(BarrierEval {
        value,
        grad_xi: grad.rows(0, table.n_i).into_owned(),
        grad_xj: grad.rows(table.n_i, table.n_j).into_owned(),
        weights,
    })
}

/// Smoothing error margins `(lower, upper)`:
/// `h_a − lower ≤ ĥ_a ≤ h_a + upper`.
pub fn error_bound(params: &CbfParams, r_i: usize, r_j: usize) -> Result<(f64, f64)> {
    params.validate()?;
    if r_i < 3 || r_j < 3 {
        return Err(Error::InvalidParameter(format!(
            "edge counts must be at least 3, got ({r_i}, {r_j})"
        )));
    }
    let b1 = (r_i + r_j) as f64;
    let b2 = r_i.max(r_j) as f64;
    Ok((
        (b2.ln() + params.buffer_b) / params.kappa,
        (b1.ln() - params.buffer_b) / params.kappa,
    ))
}

/// Two polygon-carrying systems bound to their shape models.
pub struct PairModel {
    pub model_i: Box<dyn PolygonModel>,
    pub model_j: Box<dyn PolygonModel>,
}

/// Everything derived from one stacked state.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub polygon_i: ConvexPolygon,
    pub polygon_j: ConvexPolygon,
    pub table: ComponentTable,
}

impl PairEvaluation {
    pub fn h_a(&self) -> f64 {
        h_a(&self.table)
    }

    pub fn smooth(&self, params: &CbfParams) -> Result<BarrierEval> {
        smooth_h(&self.table, params)
    }
}

impl PairModel {
    pub fn new(model_i: impl PolygonModel + 'static, model_j: impl PolygonModel + 'static) -> Self {
        Self {
            model_i: Box::new(model_i),
            model_j: Box::new(model_j),
        }
    }

    pub fn evaluate(&self, x_i: &[f64], x_j: &[f64]) -> Result<PairEvaluation> {
        let (polygon_i, jac_i) = self.model_i.polygon_with_jacobians(x_i)?;
        let (polygon_j, jac_j) = self.model_j.polygon_with_jacobians(x_j)?;
        let table = component_table(&polygon_i, &jac_i, &polygon_j, &jac_j)?;
        Ok(PairEvaluation {
            polygon_i,
            polygon_j,
            table,
        })
    }

    /// `ĥ_a` and its gradient at `(x_i, x_j)`.
    pub fn smooth_barrier(&self, x_i: &[f64], x_j: &[f64], params: &CbfParams) -> Result<BarrierEval> {
        self.evaluate(x_i, x_j)?.smooth(params)
    }
}
