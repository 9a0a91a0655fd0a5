use std::f64::consts::TAU;

use super::{signed_area, ObbVertices, Point2};
use crate::error::{Error, Result};

/// Points closer than this to a clip line count as lying on it.
pub const CLIP_EPS: f64 = 1e-9;

/// Relative tolerance on the turn test used for convexity validation.
const CONVEXITY_EPS: f64 = 1e-9;

/// Union areas below this yield an IoU of zero.
const MIN_UNION_AREA: f64 = 1e-12;

/// A convex polygon stored in counter-clockwise order (positive shoelace
/// area). Degenerate, zero-area polygons are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Checked constructor: at least three finite vertices with a consistent
    /// turning direction and a single winding. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if !vertices.iter().all(Point2::is_finite) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        if !is_convex(&vertices) {
            return Err(Error::NonConvex);
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Convex hull of an arbitrary point set (Andrew's monotone chain).
    pub fn hull(points: &[Point2]) -> Result<Self> {
        if !points.iter().all(Point2::is_finite) {
            return Err(Error::invalid("hull input must be finite"));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::invalid("hull needs at least 3 distinct points"));
        }
        let turn = |o: Point2, a: Point2, b: Point2| a.sub(o).cross(b.sub(o));
        let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
        for &p in &pts {
            while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() < 3 {
            // Collinear input: keep the two extremes plus a repeat so the
            // polygon is well formed with zero area.
            let (first, last) = (pts[0], pts[pts.len() - 1]);
            return Ok(Self {
                vertices: vec![first, last, first],
            });
        }
        Ok(Self { vertices: lower })
    }

    /// The box itself when convex, otherwise the hull of its vertices.
    /// Fewer than three distinct vertices give a zero-area polygon.
    pub fn enclosing(b: &ObbVertices) -> Self {
        b.to_polygon()
            .or_else(|_| Self::hull(b.points()))
            .unwrap_or_else(|_| Self {
                vertices: b.points().to_vec(),
            })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    /// True when `p` is inside or on the boundary.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            b.sub(a).cross(p.sub(a)) >= 0.0
        })
    }
}

fn is_convex(pts: &[Point2]) -> bool {
    let n = pts.len();
    let mut pos = false;
    let mut neg = false;
    let mut turning = 0.0;
    for i in 0..n {
        let e1 = pts[(i + 1) % n].sub(pts[i]);
        let e2 = pts[(i + 2) % n].sub(pts[(i + 1) % n]);
        let (l1, l2) = (e1.norm(), e2.norm());
        if l1 == 0.0 || l2 == 0.0 {
            continue;
        }
        let s = e1.cross(e2) / (l1 * l2);
        if s > CONVEXITY_EPS {
            pos = true;
        } else if s < -CONVEXITY_EPS {
            neg = true;
        }
        turning += e1.cross(e2).atan2(e1.x * e2.x + e1.y * e2.y);
    }
    if pos && neg {
        return false;
    }
    // A star polygon turns consistently but winds more than once.
    if pos || neg {
        (turning.abs() - TAU).abs() < 1e-6
    } else {
        true
    }
}

pub fn polygon_area(p: &ConvexPolygon) -> f64 {
    p.area()
}

/// Intersection of two convex polygons by successive half-plane clipping.
/// Returns `None` when the overlap has no area.
pub fn intersect_convex(p: &ConvexPolygon, q: &ConvexPolygon) -> Option<ConvexPolygon> {
    if p.area() <= CLIP_EPS * CLIP_EPS || q.area() <= CLIP_EPS * CLIP_EPS {
        return None;
    }
    let mut out: Vec<Point2> = p.vertices.clone();
    let m = q.vertices.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let a = q.vertices[i];
        let b = q.vertices[(i + 1) % m];
        out = clip_half_plane(&out, a, b);
    }
    dedup_ring(&mut out);
    if out.len() < 3 || signed_area(&out) <= 0.0 {
        return None;
    }
    Some(ConvexPolygon { vertices: out })
}

/// Keeps the part of `subject` on the left of the directed line `a -> b`.
fn clip_half_plane(subject: &[Point2], a: Point2, b: Point2) -> Vec<Point2> {
    let edge = b.sub(a);
    let len = edge.norm();
    let dist = |p: Point2| {
        let d = edge.cross(p.sub(a)) / len;
        if d.abs() <= CLIP_EPS {
            0.0
        } else {
            d
        }
    };
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 2);
    for j in 0..n {
        let s = subject[(j + n - 1) % n];
        let e = subject[j];
        let (ds, de) = (dist(s), dist(e));
        if de >= 0.0 {
            if ds < 0.0 {
                out.push(crossing(s, e, ds, de));
            }
            out.push(e);
        } else if ds > 0.0 {
            out.push(crossing(s, e, ds, de));
        }
    }
    out
}

#[inline]
fn crossing(s: Point2, e: Point2, ds: f64, de: f64) -> Point2 {
    let t = ds / (ds - de);
    s.add(e.sub(s).scale(t))
}

fn dedup_ring(pts: &mut Vec<Point2>) {
    let close = |p: Point2, q: Point2| (p.x - q.x).abs() <= CLIP_EPS && (p.y - q.y).abs() <= CLIP_EPS;
    pts.dedup_by(|a, b| close(*a, *b));
    while pts.len() > 1 && close(pts[0], pts[pts.len() - 1]) {
        pts.pop();
    }
}

/// Rotated IoU of two convex boxes. Zero when the union area vanishes.
pub fn skew_iou(p: &ObbVertices, q: &ObbVertices) -> Result<f64> {
    let pp = p.to_polygon()?;
    let qp = q.to_polygon()?;
    Ok(polygon_iou(&pp, &qp))
}

pub(crate) fn polygon_iou(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    let (ap, aq) = (p.area(), q.area());
    let inter = intersect_convex(p, q).map_or(0.0, |r| r.area());
    let inter = inter.min(ap).min(aq);
    let union = ap + aq - inter;
    if union < MIN_UNION_AREA {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
