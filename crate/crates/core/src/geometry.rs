//! Convex polygons, pose-parameterized shapes and Minkowski differences.
//!
//! Conventions:
//! - vertices are stored clockwise; edge `k` runs from vertex `k` to `k + 1`;
//! - the outward normal of edge `k` is the edge direction rotated by +90°;
//! - halfspace `k` is `normals[k] · z <= offsets[k]`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{Dyn, Matrix2, Matrix2xX, OMatrix, Vector2, U1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

pub type Vec2 = Vector2<f64>;

/// Row vector with one entry per state coordinate.
pub type StateRow = OMatrix<f64, U1, Dyn>;

/// Counterclockwise rotation by `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Quarter-turn counterclockwise, `R(π/2)`.
pub fn quarter_turn(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A convex polygon carried in both H- and V-representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Builds the H-representation from clockwise vertices and validates the result.
    pub fn from_vertices(vertices: Vec<Vec2>) -> Result<Self> {
        check_vertex_chain(&vertices)?;
        let poly = Self::from_vertices_unchecked(vertices);
        poly.validate()?;
        Ok(poly)
    }

    /// Takes all three lists as given and validates them against each other.
    pub fn from_parts(normals: Vec<Vec2>, offsets: Vec<f64>, vertices: Vec<Vec2>) -> Result<Self> {
        check_vertex_chain(&vertices)?;
        let poly = Self {
            normals,
            offsets,
            vertices,
        };
        poly.validate()?;
        Ok(poly)
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Vec2>) -> Self {
        let r = vertices.len();
        let mut normals = Vec::with_capacity(r);
        let mut offsets = Vec::with_capacity(r);
        for k in 0..r {
            let edge = vertices[(k + 1) % r] - vertices[k];
            let n = quarter_turn(&edge) / edge.norm();
            offsets.push(n.dot(&vertices[k]));
            normals.push(n);
        }
        Self {
            normals,
            offsets,
            vertices,
        }
    }

    /// Checks every representation invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let r = self.vertices.len();
        if self.normals.len() != r || self.offsets.len() != r {
            return Err(Error::LengthMismatch {
                normals: self.normals.len(),
                offsets: self.offsets.len(),
                vertices: r,
            });
        }
        check_vertex_chain(&self.vertices)?;
        for (k, n) in self.normals.iter().enumerate() {
            let norm = n.norm();
            if (norm - 1.0).abs() > tolerance::UNIT_NORM {
                return Err(Error::NonUnitNormal { index: k, norm });
            }
        }
        for k in 0..r {
            let mut tight = 0;
            for (l, v) in self.vertices.iter().enumerate() {
                let slack = self.normals[k].dot(v) - self.offsets[k];
                if slack > tolerance::GEOMETRIC {
                    return Err(Error::VertexOutside {
                        vertex: l,
                        row: k,
                        excess: slack,
                    });
                }
                let on_edge = l == k || l == (k + 1) % r;
                if slack.abs() <= tolerance::GEOMETRIC {
                    tight += 1;
                } else if on_edge {
                    return Err(Error::EdgeNotTight { row: k, count: tight });
                }
            }
            if tight != 2 {
                return Err(Error::EdgeNotTight { row: k, count: tight });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Endpoints of edge `k`.
    pub fn edge(&self, k: usize) -> (Vec2, Vec2) {
        let r = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % r])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (0..self.len()).map(move |k| self.edge(k))
    }

    /// Closed-set membership with the geometric tolerance.
    pub fn contains(&self, point: &Vec2) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, b)| n.dot(point) <= b + tolerance::GEOMETRIC)
    }

    pub fn translated(&self, shift: &Vec2) -> Self {
        Self {
            normals: self.normals.clone(),
            offsets: self
                .normals
                .iter()
                .zip(&self.offsets)
                .map(|(n, b)| b + n.dot(shift))
                .collect(),
            vertices: self.vertices.iter().map(|v| v + shift).collect(),
        }
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).fold(0.0, f64::max)
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(&a, &b)).sum::<f64>()
    }
}

/// Vertex-chain checks shared by every constructor: finiteness, edge lengths,
/// clockwise strict convexity and a single winding.
fn check_vertex_chain(vertices: &[Vec2]) -> Result<()> {
    let r = vertices.len();
    if r < 3 {
        return Err(Error::TooFewVertices(r));
    }
    if let Some(k) = vertices.iter().position(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    for k in 0..r {
        if (vertices[(k + 1) % r] - vertices[k]).norm() <= tolerance::GEOMETRIC {
            return Err(Error::DegenerateEdge(k));
        }
    }
    let mut left = 0;
    let mut right = 0;
    let mut turning = 0.0;
    let mut first_collinear = None;
    for k in 0..r {
        let prev = vertices[k] - vertices[(k + r - 1) % r];
        let next = vertices[(k + 1) % r] - vertices[k];
        let sine = cross(&prev, &next) / (prev.norm() * next.norm());
        if sine.abs() <= tolerance::GEOMETRIC {
            first_collinear.get_or_insert(k);
        } else if sine > 0.0 {
            left += 1;
        } else {
            right += 1;
        }
        turning += cross(&prev, &next).atan2(prev.dot(&next));
    }
    if let Some(k) = first_collinear {
        return Err(Error::Collinear(k));
    }
    if left == r {
        return Err(Error::NotClockwise);
    }
    if left > 0 || (turning + 2.0 * std::f64::consts::PI).abs() > 1e-6 {
        let k = (0..r)
            .find(|&k| {
                let prev = vertices[k] - vertices[(k + r - 1) % r];
                let next = vertices[(k + 1) % r] - vertices[k];
                cross(&prev, &next) > 0.0
            })
            .unwrap_or(0);
        return Err(Error::NonConvex(k));
    }
    debug_assert_eq!(right, r);
    Ok(())
}

/// A polygon rigidly attached to a planar pose, given by body-frame vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeFile", into = "ShapeFile")]
pub struct RigidPolygonShape {
    body_vertices: Vec<Vec2>,
    unit_edges: Vec<Vec2>,
}

/// On-disk form: `{"vertices": [[x, y], ...]}`, body frame, clockwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShapeFile {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<ShapeFile> for RigidPolygonShape {
    type Error = Error;
    fn try_from(f: ShapeFile) -> Result<Self> {
        Self::new(f.vertices.iter().map(|&[x, y]| Vec2::new(x, y)).collect())
    }
}

impl From<RigidPolygonShape> for ShapeFile {
    fn from(s: RigidPolygonShape) -> Self {
        ShapeFile {
            vertices: s.body_vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }
}

impl RigidPolygonShape {
    pub fn new(body_vertices: Vec<Vec2>) -> Result<Self> {
        ConvexPolygon::from_vertices(body_vertices.clone())?;
        let r = body_vertices.len();
        let unit_edges = (0..r)
            .map(|k| (body_vertices[(k + 1) % r] - body_vertices[k]).normalize())
            .collect();
        Ok(Self {
            body_vertices,
            unit_edges,
        })
    }

    /// Shape from the columns of a 2×r vertex matrix given as two rows.
    pub fn from_columns(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::new(xs.iter().zip(ys).map(|(&x, &y)| Vec2::new(x, y)).collect())
    }

    /// Axis-aligned rectangle centred on the body origin.
    pub fn rectangle(half_width: f64, half_height: f64) -> Result<Self> {
        Self::from_columns(
            &[half_width, half_width, -half_width, -half_width],
            &[half_height, -half_height, -half_height, half_height],
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ShapeFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let wrap = |message: String| Error::ShapeFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| wrap(e.to_string()))?;
        Self::from_json_str(&text).map_err(|e| wrap(e.to_string()))
    }

    pub fn body_vertices(&self) -> &[Vec2] {
        &self.body_vertices
    }

    pub fn len(&self) -> usize {
        self.body_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body_vertices.is_empty()
    }
}

/// Position and heading of a rigid body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub p: Vec2,
    pub theta: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            p: Vec2::new(x, y),
            theta,
        }
    }

    /// State ordering `(p_x, p_y, θ)`.
    pub fn from_state(state: &[f64]) -> Result<Self> {
        match state {
            [x, y, theta] => Ok(Self::new(*x, *y, *theta)),
            _ => Err(Error::StateDimension {
                expected: 3,
                got: state.len(),
            }),
        }
    }

    pub fn to_state(self) -> [f64; 3] {
        [self.p.x, self.p.y, self.theta]
    }
}

/// Derivatives of a polygon's H- and V-representation with respect to the
/// state that places it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeJacobians {
    /// `∂A_k/∂x`, one 2×n matrix per edge.
    pub d_normals: Vec<Matrix2xX<f64>>,
    /// `∂b_k/∂x`, one row per edge.
    pub d_offsets: Vec<StateRow>,
    /// `∂v_k/∂x`, one 2×n matrix per vertex.
    pub d_vertices: Vec<Matrix2xX<f64>>,
}

impl ShapeJacobians {
    pub fn state_dim(&self) -> usize {
        self.d_vertices.first().map_or(0, |m| m.ncols())
    }

    pub fn len(&self) -> usize {
        self.d_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_vertices.is_empty()
    }

    /// `∂b_k = v_kᵀ ∂A_k + A_kᵀ ∂v_k`, the chain rule applied to `b_k = A_kᵀ v_k`.
    fn offsets_from_chain_rule(poly: &ConvexPolygon, d_normals: &[Matrix2xX<f64>], d_vertices: &[Matrix2xX<f64>]) -> Vec<StateRow> {
        (0..poly.len())
            .map(|k| {
                poly.vertices()[k].transpose() * &d_normals[k]
                    + poly.normals()[k].transpose() * &d_vertices[k]
            })
            .collect()
    }
}

/// World-frame polygon of a rigid shape at `pose`.
pub fn polygon_from_pose(shape: &RigidPolygonShape, pose: &PlanarPose) -> Result<ConvexPolygon> {
    let rot = rotation(pose.theta);
    let rot_normal = rotation(pose.theta + FRAC_PI_2);
    let vertices: Vec<Vec2> = shape.body_vertices.iter().map(|l| pose.p + rot * l).collect();
    let normals: Vec<Vec2> = shape.unit_edges.iter().map(|u| rot_normal * u).collect();
    let offsets = normals.iter().zip(&vertices).map(|(a, v)| a.dot(v)).collect();
    let poly = ConvexPolygon {
        normals,
        offsets,
        vertices,
    };
    poly.validate()?;
    Ok(poly)
}

/// Closed-form Jacobians of a rigid shape for the state `(p_x, p_y, θ)`.
pub fn shape_jacobians(shape: &RigidPolygonShape, pose: &PlanarPose) -> ShapeJacobians {
    let rot_normal = rotation(pose.theta + FRAC_PI_2);
    let r = shape.len();
    let mut d_normals = Vec::with_capacity(r);
    let mut d_vertices = Vec::with_capacity(r);
    let mut d_offsets = Vec::with_capacity(r);
    for k in 0..r {
        let l = shape.body_vertices[k];
        let a = rot_normal * shape.unit_edges[k];
        let v = pose.p + rotation(pose.theta) * l;

        let mut dn = Matrix2xX::zeros(3);
        dn.set_column(2, &quarter_turn(&a));
        d_normals.push(dn);

        let mut dv = Matrix2xX::zeros(3);
        dv[(0, 0)] = 1.0;
        dv[(1, 1)] = 1.0;
        dv.set_column(2, &(rot_normal * l));
        d_vertices.push(dv);

        // [Aᵀ, (vᵀ R(θ+π) + lᵀ) Δl/‖Δl‖]
        let u = shape.unit_edges[k];
        let rot_pi = rotation(pose.theta + std::f64::consts::PI);
        let dtheta = (v.transpose() * rot_pi + l.transpose()) * u;
        d_offsets.push(StateRow::from_row_slice(&[a.x, a.y, dtheta[0]]));
    }
    ShapeJacobians {
        d_normals,
        d_offsets,
        d_vertices,
    }
}

/// Triangle spanned by three agent positions, given clockwise.
pub fn formation_polygon(agent_positions: &[Vec2]) -> Result<ConvexPolygon> {
    if agent_positions.len() != 3 {
        return Err(Error::StateDimension {
            expected: 3,
            got: agent_positions.len(),
        });
    }
    let [a, b, c] = [agent_positions[0], agent_positions[1], agent_positions[2]];
    let scale = (b - a).norm().max((c - a).norm()).max((c - b).norm());
    if cross(&(b - a), &(c - a)).abs() <= tolerance::GEOMETRIC * scale * scale {
        return Err(Error::CollinearFormation);
    }
    ConvexPolygon::from_vertices(agent_positions.to_vec())
}

/// Something that maps a state vector to a convex polygon and its Jacobians.
pub trait PolygonModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn polygon(&self, state: &[f64]) -> Result<ConvexPolygon>;

    fn jacobians(&self, state: &[f64]) -> Result<ShapeJacobians>;

    fn polygon_with_jacobians(&self, state: &[f64]) -> Result<(ConvexPolygon, ShapeJacobians)> {
        Ok((self.polygon(state)?, self.jacobians(state)?))
    }

    fn check_dim(&self, state: &[f64]) -> Result<()> {
        if state.len() == self.state_dim() {
            Ok(())
        } else {
            Err(Error::StateDimension {
                expected: self.state_dim(),
                got: state.len(),
            })
        }
    }
}

impl PolygonModel for RigidPolygonShape {
    fn state_dim(&self) -> usize {
        3
    }

    fn polygon(&self, state: &[f64]) -> Result<ConvexPolygon> {
        polygon_from_pose(self, &PlanarPose::from_state(state)?)
    }

    fn jacobians(&self, state: &[f64]) -> Result<ShapeJacobians> {
        Ok(shape_jacobians(self, &PlanarPose::from_state(state)?))
    }
}

/// A rigid shape with fixed identity attitude; the state is its position only.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatingShape(pub RigidPolygonShape);

impl PolygonModel for TranslatingShape {
    fn state_dim(&self) -> usize {
        2
    }

    fn polygon(&self, state: &[f64]) -> Result<ConvexPolygon> {
        self.check_dim(state)?;
        polygon_from_pose(&self.0, &PlanarPose::new(state[0], state[1], 0.0))
    }

    fn jacobians(&self, state: &[f64]) -> Result<ShapeJacobians> {
        self.check_dim(state)?;
        let r = self.0.len();
        let poly = self.polygon(state)?;
        let d_normals = vec![Matrix2xX::zeros(2); r];
        let d_vertices = vec![Matrix2xX::identity(2); r];
        let d_offsets = poly
            .normals()
            .iter()
            .map(|a| StateRow::from_row_slice(&[a.x, a.y]))
            .collect();
        Ok(ShapeJacobians {
            d_normals,
            d_offsets,
            d_vertices,
        })
    }
}

/// Triangle whose vertices are three agent positions, state `(v1, v2, v3)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TriangleFormation;

impl PolygonModel for TriangleFormation {
    fn state_dim(&self) -> usize {
        6
    }

    fn polygon(&self, state: &[f64]) -> Result<ConvexPolygon> {
        self.check_dim(state)?;
        let pts: Vec<Vec2> = state.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
        formation_polygon(&pts)
    }

    fn jacobians(&self, state: &[f64]) -> Result<ShapeJacobians> {
        let poly = self.polygon(state)?;
        let mut d_vertices = Vec::with_capacity(3);
        for k in 0..3 {
            let mut dv = Matrix2xX::zeros(6);
            dv[(0, 2 * k)] = 1.0;
            dv[(1, 2 * k + 1)] = 1.0;
            d_vertices.push(dv);
        }
        let d_normals: Vec<Matrix2xX<f64>> = (0..3)
            .map(|k| {
                let (a, b) = poly.edge(k);
                let d = b - a;
                let len = d.norm();
                let u = d / len;
                // d(d/‖d‖) = (I − uuᵀ)/‖d‖ · dd
                let proj = (Matrix2::identity() - u * u.transpose()) / len;
                let quarter = Matrix2::new(0.0, -1.0, 1.0, 0.0);
                let dd = &d_vertices[(k + 1) % 3] - &d_vertices[k];
                quarter * proj * dd
            })
            .collect();
        let d_offsets = ShapeJacobians::offsets_from_chain_rule(&poly, &d_normals, &d_vertices);
        Ok(ShapeJacobians {
            d_normals,
            d_offsets,
            d_vertices,
        })
    }
}

/// Maximum of `direction · v` over the polygon.
pub fn support_value(poly: &ConvexPolygon, direction: &Vec2) -> Result<f64> {
    if direction.norm() == 0.0 || !direction.norm().is_finite() {
        return Err(Error::ZeroDirection);
    }
    Ok(poly
        .vertices()
        .iter()
        .map(|v| direction.dot(v))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Pairwise differences `v^j_l − v^i_k` labelled with `(k, l)`.
pub(crate) struct LabelledPoint {
    pub point: Vec2,
    pub label: (usize, usize),
}

/// Convex hull of labelled points, clockwise, collinear points dropped.
pub(crate) fn convex_hull_clockwise(mut pts: Vec<LabelledPoint>) -> Vec<LabelledPoint> {
    pts.sort_by(|a, b| {
        a.point
            .x
            .total_cmp(&b.point.x)
            .then(a.point.y.total_cmp(&b.point.y))
    });
    pts.dedup_by(|a, b| (a.point - b.point).norm() <= tolerance::GEOMETRIC);
    if pts.len() < 3 {
        return pts;
    }
    // Keep strict left turns only (counterclockwise chain).
    let turns_left = |o: &Vec2, a: &Vec2, b: &Vec2| {
        let e1 = a - o;
        let e2 = b - a;
        cross(&e1, &e2) > tolerance::GEOMETRIC * e1.norm() * e2.norm()
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * pts.len());
    for i in 0..pts.len() {
        while hull.len() >= 2
            && !turns_left(&pts[hull[hull.len() - 2]].point, &pts[hull[hull.len() - 1]].point, &pts[i].point)
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for i in (0..pts.len() - 1).rev() {
        while hull.len() >= lower
            && !turns_left(&pts[hull[hull.len() - 2]].point, &pts[hull[hull.len() - 1]].point, &pts[i].point)
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    // Counterclockwise → clockwise.
    hull.reverse();
    let mut taken: Vec<Option<LabelledPoint>> = pts.into_iter().map(Some).collect();
    hull.into_iter().filter_map(|i| taken[i].take()).collect()
}

/// `P^j − P^i` with each hull vertex labelled by the vertex pair `(k^i, l^j)`
/// that produces it.
pub(crate) fn minkowski_difference_labelled(
    pi: &ConvexPolygon,
    pj: &ConvexPolygon,
) -> (ConvexPolygon, Vec<(usize, usize)>) {
    let mut pts = Vec::with_capacity(pi.len() * pj.len());
    for (k, vi) in pi.vertices().iter().enumerate() {
        for (l, vj) in pj.vertices().iter().enumerate() {
            pts.push(LabelledPoint {
                point: vj - vi,
                label: (k, l),
            });
        }
    }
    let hull = convex_hull_clockwise(pts);
    let labels = hull.iter().map(|p| p.label).collect();
    let poly = ConvexPolygon::from_vertices_unchecked(hull.into_iter().map(|p| p.point).collect());
    (poly, labels)
}

/// The Minkowski difference `P^j − P^i` as the hull of pairwise vertex differences.
pub fn minkowski_difference_vertices(pi: &ConvexPolygon, pj: &ConvexPolygon) -> ConvexPolygon {
    minkowski_difference_labelled(pi, pj).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_square() -> RigidPolygonShape {
        RigidPolygonShape::rectangle(0.5, 0.5).unwrap()
    }

    fn vehicle_triangle() -> RigidPolygonShape {
        RigidPolygonShape::from_columns(&[3.0, -2.0, -2.0], &[0.0, -2.5, 2.5]).unwrap()
    }

    #[test]
    fn triangle_at_identity_pose_keeps_body_vertices() {
        let shape = vehicle_triangle();
        let poly = polygon_from_pose(&shape, &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(poly.vertices(), shape.body_vertices());
    }

    #[test]
    fn square_right_edge_normal() {
        let poly = polygon_from_pose(&unit_square(), &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        let (a, b) = poly.edge(0);
        assert_eq!((a, b), (Vec2::new(0.5, 0.5), Vec2::new(0.5, -0.5)));
        assert_abs_diff_eq!(poly.normals()[0], Vec2::new(1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(poly.offsets()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_rotates_vertex() {
        let shape = RigidPolygonShape::rectangle(0.5, 0.25).unwrap();
        let poly = polygon_from_pose(&shape, &PlanarPose::new(0.0, 0.0, PI / 2.0)).unwrap();
        assert_abs_diff_eq!(poly.vertices()[0], Vec2::new(-0.25, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        let repeated = RigidPolygonShape::from_columns(&[1.0, 1.0, -1.0], &[0.0, 0.0, 1.0]);
        assert_eq!(repeated.unwrap_err(), Error::DegenerateEdge(0));
        let ccw = RigidPolygonShape::from_columns(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]);
        assert_eq!(ccw.unwrap_err(), Error::NotClockwise);
        let collinear = RigidPolygonShape::from_columns(&[0.0, 1.0, 2.0, 1.0], &[0.0, 0.0, 0.0, -1.0]);
        assert!(matches!(collinear.unwrap_err(), Error::Collinear(_)));
        let two = RigidPolygonShape::from_columns(&[0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(two.unwrap_err(), Error::TooFewVertices(2));
    }

    #[test]
    fn nonconvex_and_double_wound_chains_are_rejected() {
        // Clockwise arrow head with one reflex vertex.
        let arrow = RigidPolygonShape::from_columns(&[0.0, 2.0, 0.0, 0.5], &[2.0, 0.0, -2.0, 0.0]);
        // Oriented pentagram: all turns one way but winds twice.
        let star: Vec<Vec2> = (0..5)
            .map(|k| {
                let t = -(k as f64) * 4.0 * PI / 5.0;
                Vec2::new(t.cos(), t.sin())
            })
            .collect();
        assert!(matches!(arrow.unwrap_err(), Error::NonConvex(_)));
        assert!(matches!(RigidPolygonShape::new(star).unwrap_err(), Error::NonConvex(_)));
    }

    #[test]
    fn validator_reports_bad_parts() {
        let good = polygon_from_pose(&unit_square(), &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        let mut normals = good.normals().to_vec();
        normals[1] *= 1.5;
        let err = ConvexPolygon::from_parts(normals, good.offsets().to_vec(), good.vertices().to_vec());
        assert!(matches!(err.unwrap_err(), Error::NonUnitNormal { index: 1, .. }));
        let mut offsets = good.offsets().to_vec();
        offsets[2] -= 0.1;
        let err = ConvexPolygon::from_parts(good.normals().to_vec(), offsets, good.vertices().to_vec());
        assert!(matches!(err.unwrap_err(), Error::VertexOutside { row: 2, .. }));
        let mut offsets = good.offsets().to_vec();
        offsets[3] += 0.1;
        let err = ConvexPolygon::from_parts(good.normals().to_vec(), offsets, good.vertices().to_vec());
        assert!(matches!(err.unwrap_err(), Error::EdgeNotTight { row: 3, .. }));
        let err = ConvexPolygon::from_parts(vec![], vec![], good.vertices().to_vec());
        assert!(matches!(err.unwrap_err(), Error::LengthMismatch { .. }));
    }

    #[test]
    fn jacobian_third_column_for_unit_vertex() {
        let shape = RigidPolygonShape::from_columns(&[1.0, -1.0, -1.0], &[0.0, -1.0, 1.0]).unwrap();
        let jac = shape_jacobians(&shape, &PlanarPose::new(0.3, -0.2, 0.0));
        assert_abs_diff_eq!(jac.d_vertices[0].column(2).into_owned(), Vec2::new(0.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(jac.d_vertices[0].column(0).into_owned(), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn vertex_jacobian_matches_closed_form() {
        let shape = vehicle_triangle();
        let pose = PlanarPose::new(1.0, 2.0, 0.7);
        let jac = shape_jacobians(&shape, &pose);
        for (k, l) in shape.body_vertices().iter().enumerate() {
            let expected = rotation(pose.theta + FRAC_PI_2) * l;
            assert_abs_diff_eq!(jac.d_vertices[k].column(2).into_owned(), expected, epsilon = 1e-14);
            assert_eq!(jac.d_vertices[k].fixed_view::<2, 2>(0, 0).into_owned(), Matrix2::identity());
        }
    }

    #[test]
    fn offset_jacobian_matches_chain_rule() {
        let shape = vehicle_triangle();
        let pose = PlanarPose::new(-1.0, 2.0, 2.1);
        let poly = polygon_from_pose(&shape, &pose).unwrap();
        let jac = shape_jacobians(&shape, &pose);
        let chain = ShapeJacobians::offsets_from_chain_rule(&poly, &jac.d_normals, &jac.d_vertices);
        for (direct, chained) in jac.d_offsets.iter().zip(&chain) {
            assert_abs_diff_eq!(direct, chained, epsilon = 1e-12);
        }
    }

    #[test]
    fn formation_axis_edge() {
        let poly = formation_polygon(&[Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(poly.normals()[0], Vec2::new(-1.0, 0.0), epsilon = 1e-15);
        let err = formation_polygon(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]);
        assert_eq!(err.unwrap_err(), Error::CollinearFormation);
    }

    #[test]
    fn self_difference_of_square() {
        let sq = polygon_from_pose(&unit_square(), &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        let d = minkowski_difference_vertices(&sq, &sq);
        assert_eq!(d.len(), 4);
        d.validate().unwrap();
        for v in d.vertices() {
            assert_abs_diff_eq!(v.x.abs(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.y.abs(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn shifted_difference_of_squares() {
        let a = polygon_from_pose(&unit_square(), &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        let b = polygon_from_pose(&unit_square(), &PlanarPose::new(3.0, 0.0, 0.0)).unwrap();
        let d = minkowski_difference_vertices(&a, &b);
        assert_eq!(d.len(), 4);
        for v in d.vertices() {
            assert_abs_diff_eq!((v.x - 3.0).abs(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.y.abs(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn support_of_square() {
        let sq = polygon_from_pose(&unit_square(), &PlanarPose::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(support_value(&sq, &Vec2::new(1.0, 0.0)).unwrap(), 0.5);
        let diag = Vec2::new(1.0, 1.0) / 2f64.sqrt();
        assert_abs_diff_eq!(support_value(&sq, &diag).unwrap(), 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(support_value(&sq, &Vec2::zeros()).unwrap_err(), Error::ZeroDirection);
    }

    #[test]
    fn shape_file_round_trip_and_errors() {
        let shape = RigidPolygonShape::from_json_str(r#"{"vertices": [[3,0],[-2,-2.5],[-2,2.5]]}"#).unwrap();
        assert_eq!(shape, vehicle_triangle());
        let text = serde_json::to_string(&shape).unwrap();
        assert_eq!(RigidPolygonShape::from_json_str(&text).unwrap(), shape);
        let ccw = RigidPolygonShape::from_json_str(r#"{"vertices": [[3,0],[-2,2.5],[-2,-2.5]]}"#);
        assert_eq!(ccw.unwrap_err(), Error::NotClockwise);
    }

    #[test]
    fn translating_shape_jacobians() {
        let model = TranslatingShape(unit_square());
        let jac = model.jacobians(&[1.0, 2.0]).unwrap();
        assert_eq!(jac.state_dim(), 2);
        assert_abs_diff_eq!(jac.d_offsets[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(jac.d_offsets[0][1], 0.0, epsilon = 1e-15);
        assert!(model.jacobians(&[1.0]).is_err());
    }
}
