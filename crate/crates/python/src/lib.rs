//! Python bindings: polygons, signed distance, the smooth barrier, the
//! closed-form filters and the scenario runner.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use polycbf::baseline::{baseline_h_and_gradient, BaselineConfig};
use polycbf::barrier::{error_bound, BarrierEval, CbfParams, PairModel};
use polycbf::filter::{filter_control_affine, filter_single_integrator, AffineAgent, FilterConfig, FilterResult};
use polycbf::geometry::{minkowski_difference_vertices, polygon_from_pose, ConvexPolygon, PlanarPose, RigidPolygonShape, Vec2};
use polycbf::scenario::{run_property_suite, run_scenario as run, FilterMode, Overrides, ScenarioConfig, SuiteCounts};

fn err(e: polycbf::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn points(v: Vec<(f64, f64)>) -> Vec<Vec2> {
    v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect()
}

fn pairs(v: &[Vec2]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p.x, p.y)).collect()
}

fn pose(x: [f64; 3]) -> PlanarPose {
    PlanarPose::new(x[0], x[1], x[2])
}

/// Convex polygon with clockwise vertices.
#[pyclass(name = "Polygon", frozen)]
struct PyPolygon {
    inner: ConvexPolygon,
}

#[pymethods]
impl PyPolygon {
    #[new]
    fn new(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: ConvexPolygon::from_vertices(points(vertices)).map_err(err)?,
        })
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        pairs(self.inner.vertices())
    }

    #[getter]
    fn normals(&self) -> Vec<(f64, f64)> {
        pairs(self.inner.normals())
    }

    #[getter]
    fn offsets(&self) -> Vec<f64> {
        self.inner.offsets().to_vec()
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.inner.contains(&Vec2::new(x, y))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Polygon({:?})", self.vertices())
    }
}

/// Body-frame polygon that can be placed at a planar pose.
#[pyclass(name = "Shape", frozen)]
struct PyShape {
    inner: RigidPolygonShape,
}

#[pymethods]
impl PyShape {
    #[new]
    fn new(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: RigidPolygonShape::new(points(vertices)).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RigidPolygonShape::load(path).map_err(err)?,
        })
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        pairs(self.inner.body_vertices())
    }

    fn at_pose(&self, x: f64, y: f64, theta: f64) -> PyResult<PyPolygon> {
        Ok(PyPolygon {
            inner: polygon_from_pose(&self.inner, &PlanarPose::new(x, y, theta)).map_err(err)?,
        })
    }
}

fn barrier_dict<'py>(py: Python<'py>, e: &BarrierEval) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", e.value)?;
    d.set_item("grad_i", e.grad_xi.as_slice().to_vec())?;
    d.set_item("grad_j", e.grad_xj.as_slice().to_vec())?;
    d.set_item("weights", e.weights.clone())?;
    Ok(d)
}

/// Two rigid polygons with pose states `(x, y, θ)`.
#[pyclass(name = "BarrierPair", frozen)]
struct PyBarrierPair {
    pair: PairModel,
    edges: (usize, usize),
}

#[pymethods]
impl PyBarrierPair {
    #[new]
    fn new(shape_i: &PyShape, shape_j: &PyShape) -> Self {
        Self {
            edges: (shape_i.inner.len(), shape_j.inner.len()),
            pair: PairModel::new(shape_i.inner.clone(), shape_j.inner.clone()),
        }
    }

    /// Nonsmooth lower bound of the signed distance.
    fn h_a(&self, x_i: [f64; 3], x_j: [f64; 3]) -> PyResult<f64> {
        Ok(self.pair.evaluate(&x_i, &x_j).map_err(err)?.h_a())
    }

    /// Smoothed barrier, gradient and convex-combination weights.
    fn smooth<'py>(
        &self,
        py: Python<'py>,
        x_i: [f64; 3],
        x_j: [f64; 3],
        kappa: f64,
        buffer: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let e = self
            .pair
            .smooth_barrier(&x_i, &x_j, &CbfParams::new(kappa, buffer))
            .map_err(err)?;
        barrier_dict(py, &e)
    }

    /// `(lower, upper)` margins of the smoothing error.
    fn error_bound(&self, kappa: f64, buffer: f64) -> PyResult<(f64, f64)> {
        error_bound(&CbfParams::new(kappa, buffer), self.edges.0, self.edges.1).map_err(err)
    }
}

#[pyfunction]
fn signed_distance(p_i: &PyPolygon, p_j: &PyPolygon) -> (f64, (f64, f64), (f64, f64)) {
    let r = polycbf::signed_distance(&p_i.inner, &p_j.inner);
    (r.value, (r.witness_i.x, r.witness_i.y), (r.witness_j.x, r.witness_j.y))
}

#[pyfunction]
fn minkowski_difference(p_i: &PyPolygon, p_j: &PyPolygon) -> PyPolygon {
    PyPolygon {
        inner: minkowski_difference_vertices(&p_i.inner, &p_j.inner),
    }
}

/// Sampled-boundary comparison barrier: `(value, grad_i, grad_j)`.
#[pyfunction]
fn baseline_barrier(
    x_i: [f64; 3],
    x_j: [f64; 3],
    shape_i: &PyShape,
    shape_j: &PyShape,
    samples_per_edge: usize,
) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let cfg = BaselineConfig::new(samples_per_edge).map_err(err)?;
    let e = baseline_h_and_gradient(&pose(x_i), &pose(x_j), &shape_i.inner, &shape_j.inner, &cfg).map_err(err)?;
    Ok((e.value, e.grad_xi.as_slice().to_vec(), e.grad_xj.as_slice().to_vec()))
}

fn result_dict<'py>(py: Python<'py>, r: &FilterResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let u: Vec<Vec<f64>> = r.u_star.iter().map(|u| u.as_slice().to_vec()).collect();
    d.set_item("u", u)?;
    d.set_item("eta", r.eta.clone())?;
    d.set_item("active", r.active.clone())?;
    d.set_item("residual", r.constraint_residual)?;
    Ok(d)
}

fn barrier_from(value: f64, grad_i: Vec<f64>, grad_j: Vec<f64>) -> BarrierEval {
    BarrierEval {
        value,
        grad_xi: DVector::from_vec(grad_i),
        grad_xj: DVector::from_vec(grad_j),
        weights: Vec::new(),
    }
}

fn filter_config(alpha: f64, epsilon: Option<f64>) -> FilterConfig {
    let cfg = FilterConfig::new(alpha);
    match epsilon {
        Some(e) => cfg.with_epsilon(e),
        None => cfg,
    }
}

/// Closed-form filter for two single integrators.
#[pyfunction]
#[pyo3(signature = (u0_i, u0_j, value, grad_i, grad_j, alpha, epsilon=None))]
#[allow(clippy::too_many_arguments)]
fn filter_single<'py>(
    py: Python<'py>,
    u0_i: Vec<f64>,
    u0_j: Vec<f64>,
    value: f64,
    grad_i: Vec<f64>,
    grad_j: Vec<f64>,
    alpha: f64,
    epsilon: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = filter_single_integrator(
        &DVector::from_vec(u0_i),
        &DVector::from_vec(u0_j),
        &barrier_from(value, grad_i, grad_j),
        &filter_config(alpha, epsilon),
    )
    .map_err(err)?;
    result_dict(py, &r)
}

fn agent(drift: Vec<f64>, input_matrix: Vec<Vec<f64>>, nominal: Vec<f64>) -> PyResult<AffineAgent> {
    let rows = input_matrix.len();
    let cols = input_matrix.first().map_or(0, Vec::len);
    if input_matrix.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("input matrix rows differ in length"));
    }
    Ok(AffineAgent {
        drift: DVector::from_vec(drift),
        input_matrix: DMatrix::from_fn(rows, cols, |r, c| input_matrix[r][c]),
        nominal: DVector::from_vec(nominal),
    })
}

/// Closed-form filter for two control-affine agents `ẋ = f + g u`.
/// Each agent is `(drift, input_matrix_rows, nominal)`.
#[pyfunction]
#[pyo3(signature = (agent_i, agent_j, value, grad_i, grad_j, alpha, epsilon=None))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn filter_affine<'py>(
    py: Python<'py>,
    agent_i: (Vec<f64>, Vec<Vec<f64>>, Vec<f64>),
    agent_j: (Vec<f64>, Vec<Vec<f64>>, Vec<f64>),
    value: f64,
    grad_i: Vec<f64>,
    grad_j: Vec<f64>,
    alpha: f64,
    epsilon: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let agents = [agent(agent_i.0, agent_i.1, agent_i.2)?, agent(agent_j.0, agent_j.1, agent_j.2)?];
    let r = filter_control_affine(&agents, &barrier_from(value, grad_i, grad_j), &filter_config(alpha, epsilon))
        .map_err(err)?;
    result_dict(py, &r)
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Runs a scenario config and returns its summary as a dict.
#[pyfunction]
#[pyo3(signature = (config, out=None, dt=None, kappa=None, buffer=None, filter=None))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &str,
    out: Option<String>,
    dt: Option<f64>,
    kappa: Option<f64>,
    buffer: Option<f64>,
    filter: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ScenarioConfig::load(config).map_err(err)?;
    let filter = filter
        .map(str::parse::<FilterMode>)
        .transpose()
        .map_err(err)?;
    cfg.apply(&Overrides {
        output_dir: out.map(Into::into),
        dt,
        kappa,
        buffer,
        filter,
    });
    let (_, summary) = py.detach(|| run(&cfg)).map_err(err)?;
    json_to_py(py, &summary)
}

/// Randomized property suite; `counts` uses the `name=value,...` syntax.
#[pyfunction]
#[pyo3(signature = (seed=0, counts=None))]
fn verify<'py>(py: Python<'py>, seed: u64, counts: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let mut c = SuiteCounts::default();
    if let Some(spec) = counts {
        c = c.with_overrides(spec).map_err(err)?;
    }
    let report = py.detach(|| run_property_suite(seed, &c));
    json_to_py(py, &report)
}

#[pymodule]
pub fn polycbf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolygon>()?;
    m.add_class::<PyShape>()?;
    m.add_class::<PyBarrierPair>()?;
    m.add_function(wrap_pyfunction!(signed_distance, m)?)?;
    m.add_function(wrap_pyfunction!(minkowski_difference, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(filter_single, m)?)?;
    m.add_function(wrap_pyfunction!(filter_affine, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
