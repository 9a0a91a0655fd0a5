//! Oriented bounding boxes: the eight-parameter vertex form, the
//! five-parameter center/size/angle form, exact rotated IoU and rotated NMS.
//!
//! Coordinates follow the image convention (x right, y down). A box built
//! from [`ObbCenterWHAngle`] lists its corners as top-left, top-right,
//! bottom-right, bottom-left in the box's own frame.

mod nms;
mod polygon;

pub(crate) use nms::nms_with_polygons;
pub use nms::rotated_nms;
pub(crate) use polygon::polygon_iou;
pub use polygon::{intersect_convex, polygon_area, skew_iou, ConvexPolygon, CLIP_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    /// z-component of the 2D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotates by `theta` radians about the origin.
    #[inline]
    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// An oriented box given by four ordered vertices `a, b, c, d`.
///
/// Only finiteness is enforced here. Loss kernels accept arbitrary
/// (possibly non-convex) vertex sets; geometry routines go through
/// [`ObbVertices::to_polygon`], which checks convexity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbVertices {
    pts: [Point2; 4],
}

impl ObbVertices {
    pub fn new(a: Point2, b: Point2, c: Point2, d: Point2) -> Result<Self> {
        Self::from_points([a, b, c, d])
    }

    pub fn from_points(pts: [Point2; 4]) -> Result<Self> {
        if pts.iter().all(Point2::is_finite) {
            Ok(Self { pts })
        } else {
            Err(Error::invalid("box vertices must be finite"))
        }
    }

    /// Builds a box from `[ax, ay, bx, by, cx, cy, dx, dy]`.
    pub fn from_array(v: [f64; 8]) -> Result<Self> {
        Self::from_points([
            Point2::new(v[0], v[1]),
            Point2::new(v[2], v[3]),
            Point2::new(v[4], v[5]),
            Point2::new(v[6], v[7]),
        ])
    }

    pub fn to_array(&self) -> [f64; 8] {
        let p = &self.pts;
        [p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y]
    }

    #[inline]
    pub fn points(&self) -> &[Point2; 4] {
        &self.pts
    }

    pub fn a(&self) -> Point2 {
        self.pts[0]
    }
    pub fn b(&self) -> Point2 {
        self.pts[1]
    }
    pub fn c(&self) -> Point2 {
        self.pts[2]
    }
    pub fn d(&self) -> Point2 {
        self.pts[3]
    }

    /// Mean of the four vertices.
    pub fn centroid(&self) -> Point2 {
        let s = self.pts.iter().fold(Point2::default(), |acc, p| acc.add(*p));
        s.scale(0.25)
    }

    /// Relabels the vertices so that vertex `k` (mod 4) becomes `a`.
    /// `cyclic_shift(1)` turns `(a, b, c, d)` into `(b, c, d, a)`.
    pub fn cyclic_shift(&self, k: usize) -> Self {
        let mut pts = self.pts;
        pts.rotate_left(k % 4);
        Self { pts }
    }

    /// Applies `f` to every vertex, re-validating the result.
    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Result<Self> {
        Self::from_points(self.pts.map(f))
    }

    pub fn translate(&self, t: Point2) -> Result<Self> {
        self.map(|p| p.add(t))
    }

    /// Uniform scaling about the origin.
    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map(|p| p.scale(s))
    }

    pub fn rotate_about(&self, center: Point2, theta: f64) -> Result<Self> {
        self.map(|p| p.sub(center).rotate(theta).add(center))
    }

    /// Signed shoelace area; positive for counter-clockwise order in a
    /// y-up frame (clockwise on screen).
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.pts)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn to_polygon(&self) -> Result<ConvexPolygon> {
        ConvexPolygon::new(self.pts.to_vec())
    }
}

/// Five-parameter box: center, width, height and rotation angle (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbCenterWHAngle {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl ObbCenterWHAngle {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h, theta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.cx, self.cy, self.w, self.h, self.theta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("box parameters must be finite"));
        }
        if self.w < 0.0 || self.h < 0.0 {
            return Err(Error::invalid(format!(
                "box size must be non-negative, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_vertices(&self) -> Result<ObbVertices> {
        vertices_from_cwha(self)
    }
}

/// Corners of the rotated rectangle, ordered top-left, top-right,
/// bottom-right, bottom-left in the box frame. The angle is applied as a
/// standard rotation matrix in image coordinates (y down), so a positive
/// angle turns the box clockwise on screen.
pub fn vertices_from_cwha(b: &ObbCenterWHAngle) -> Result<ObbVertices> {
    b.validate()?;
    let (hw, hh) = (0.5 * b.w, 0.5 * b.h);
    let center = Point2::new(b.cx, b.cy);
    let local = [
        Point2::new(-hw, -hh),
        Point2::new(hw, -hh),
        Point2::new(hw, hh),
        Point2::new(-hw, hh),
    ];
    ObbVertices::from_points(local.map(|p| p.rotate(b.theta).add(center)))
}

/// A scored, class-labelled oriented box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: ObbVertices,
    pub score: f64,
    pub class_id: usize,
}

impl Detection {
    pub fn new(bbox: ObbVertices, score: f64, class_id: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!("score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, score, class_id })
    }
}

pub(crate) fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * acc
}
