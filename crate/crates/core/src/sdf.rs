//! Exact signed distance between convex polygons.
//!
//! The distance is read off the Minkowski difference `D = P^j − P^i`: the two
//! polygons overlap iff the origin lies in `D`, and the magnitude is the
//! distance from the origin to `∂D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{minkowski_difference_labelled, ConvexPolygon, Vec2};

/// Signed distance with the pair of points that realises it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdfResult {
    /// Gap when disjoint, negated penetration depth when overlapping.
    pub value: f64,
    pub witness_i: Vec2,
    pub witness_j: Vec2,
}

/// Closest point of segment `[a, b]` to `point`, as `(t, closest)`.
fn closest_on_segment(point: &Vec2, a: &Vec2, b: &Vec2) -> (f64, Vec2) {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((point - a).dot(&d) / len2).clamp(0.0, 1.0)
    };
    (t, a + d * t)
}

pub fn signed_distance(pi: &ConvexPolygon, pj: &ConvexPolygon) -> SdfResult {
    let (diff, labels) = minkowski_difference_labelled(pi, pj);
    let origin = Vec2::zeros();
    let inside = diff.offsets().iter().all(|&b| b >= 0.0);

    let mut best = (f64::INFINITY, 0, 0.0);
    for (k, (a, b)) in diff.edges().enumerate() {
        let (t, z) = closest_on_segment(&origin, &a, &b);
        let dist = z.norm();
        // strict: ties keep the lowest edge index
        if dist < best.0 {
            best = (dist, k, t);
        }
    }
    let (dist, k, t) = best;
    let (ki_a, lj_a) = labels[k];
    let (ki_b, lj_b) = labels[(k + 1) % labels.len()];
    let vi = pi.vertices();
    let vj = pj.vertices();
    let witness_i = vi[ki_a] * (1.0 - t) + vi[ki_b] * t;
    let witness_j = vj[lj_a] * (1.0 - t) + vj[lj_b] * t;

    let value = if dist == 0.0 {
        0.0
    } else if inside {
        -dist
    } else {
        dist
    };
    SdfResult {
        value,
        witness_i,
        witness_j,
    }
}

/// Distance from `point` to the polygon boundary (min over edges).
pub fn distance_point_to_boundary(point: &Vec2, poly: &ConvexPolygon) -> f64 {
    poly.edges()
        .map(|(a, b)| (closest_on_segment(point, &a, &b).1 - point).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Separating-axis test over the edge normals of both polygons.
/// Touching polygons count as overlapping.
pub fn polygons_overlap(pi: &ConvexPolygon, pj: &ConvexPolygon) -> bool {
    let separated_by = |a: &ConvexPolygon, b: &ConvexPolygon| {
        a.normals().iter().zip(a.offsets()).any(|(n, off)| {
            b.vertices()
                .iter()
                .all(|v| n.dot(v) - off > 0.0)
        })
    };
    !(separated_by(pi, pj) || separated_by(pj, pi))
}

/// Uniform samples of every edge including both endpoints; shared corners
/// appear once.
pub fn sample_boundary(poly: &ConvexPolygon, samples_per_edge: usize) -> Vec<Vec2> {
    let steps = samples_per_edge.saturating_sub(1).max(1);
    let mut out = Vec::with_capacity(poly.len() * steps);
    for (a, b) in poly.edges() {
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Closest pair among sampled boundary points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestPair {
    pub witness_i: Vec2,
    pub witness_j: Vec2,
    pub distance: f64,
    /// Index of the chosen sample on each boundary; the lowest index pair wins ties.
    pub sample_i: usize,
    pub sample_j: usize,
}

/// Exhaustive nearest pair over the sampled boundaries of two disjoint polygons.
pub fn nearest_boundary_points(
    pi: &ConvexPolygon,
    pj: &ConvexPolygon,
    samples_per_edge: usize,
) -> Result<NearestPair> {
    if samples_per_edge < 2 {
        return Err(Error::InvalidParameter(format!(
            "samples_per_edge must be at least 2, got {samples_per_edge}"
        )));
    }
    if polygons_overlap(pi, pj) {
        return Err(Error::Overlap);
    }
    let si = sample_boundary(pi, samples_per_edge);
    let sj = sample_boundary(pj, samples_per_edge);
    let mut best = (f64::INFINITY, 0, 0);
    for (a, wi) in si.iter().enumerate() {
        for (b, wj) in sj.iter().enumerate() {
            let d2 = (wj - wi).norm_squared();
            if d2 < best.0 {
                best = (d2, a, b);
            }
        }
    }
    let (d2, a, b) = best;
    Ok(NearestPair {
        witness_i: si[a],
        witness_j: sj[b],
        distance: d2.sqrt(),
        sample_i: a,
        sample_j: b,
    })
}
