//! Planar geometry primitives: rectangular regions, ellipses, projections.
//!
//! A [`RectRegion`] models a rectangular floor opening (e.g. a manway in a
//! column tray). Its canonical representation is four vertices in
//! counter-clockwise order starting from the lexicographically smallest
//! (min-x, then min-y) corner; every constructor normalizes to that form so
//! downstream indexing (sub-regions, adjacent edges) is deterministic.

#[allow(unused_imports)] // inherent f64 methods shadow the shim in std builds
use crate::math::FloatExt as _;
use core::f64::consts::PI;
use nalgebra::{Matrix2, Vector2};

/// 2-D column vector of `f64`.
pub type Vec2 = Vector2<f64>;

/// 2-D square matrix of `f64`.
pub type Mat2 = Matrix2<f64>;

/// Geometry construction / query errors.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// A rectangle side length or scale factor was not strictly positive.
    NonPositiveExtent { value: f64 },
    /// The four vertices do not form a rectangle within tolerance.
    NotARectangle { defect: f64 },
}

impl core::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GeometryError::NonPositiveExtent { value } => {
                write!(f, "extent must be strictly positive, got {value}")
            }
            GeometryError::NotARectangle { defect } => {
                write!(f, "vertices do not form a rectangle (defect {defect:.3e})")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

/// Rotation matrix for angle `theta` (radians, counter-clockwise).
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = (theta.sin(), theta.cos());
    Mat2::new(c, -s, s, c)
}

/// Perpendicular of `v`, rotated +90 degrees.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Planar cross product `a.x * b.y - a.y * b.x`.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A rectangle in the plane, stored as four vertices in counter-clockwise
/// order starting from the lexicographically smallest corner.
#[derive(Debug, Clone, PartialEq)]
pub struct RectRegion {
    vertices: [Vec2; 4],
}

/// Relative tolerance for the rectangle-shape check in `from_vertices`.
const RECT_SHAPE_TOL: f64 = 1e-9;

impl RectRegion {
    /// Axis pair rectangle: `width` along the local x axis (rotated by
    /// `theta`), `height` along the local y axis, centered at `center`.
    pub fn new(center: Vec2, width: f64, height: f64, theta: f64) -> Result<Self, GeometryError> {
        for ext in [width, height] {
            if !(ext > 0.0) || !ext.is_finite() {
                return Err(GeometryError::NonPositiveExtent { value: ext });
            }
        }
        let r = rotation(theta);
        let hw = r * Vec2::new(0.5 * width, 0.0);
        let hh = r * Vec2::new(0.0, 0.5 * height);
        let raw = [
            center - hw - hh,
            center + hw - hh,
            center + hw + hh,
            center - hw + hh,
        ];
        Ok(Self::normalize(raw))
    }

    /// Builds a rectangle from four vertices in any cyclic order and either
    /// orientation. Fails if they do not form a rectangle within a relative
    /// tolerance of 1e-9.
    pub fn from_vertices(vertices: [Vec2; 4]) -> Result<Self, GeometryError> {
        let rect = Self::normalize(vertices);
        let [a, b, c, d] = rect.vertices;
        let e0 = b - a;
        let e1 = c - b;
        let e2 = d - c;
        let e3 = a - d;
        let scale = e0.norm().max(e1.norm());
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeometryError::NonPositiveExtent { value: scale });
        }
        // Opposite sides must cancel and adjacent sides must be orthogonal.
        let defect = (e0 + e2).norm().max((e1 + e3).norm()).max(e0.dot(&e1).abs() / scale);
        if defect > RECT_SHAPE_TOL * scale {
            return Err(GeometryError::NotARectangle { defect: defect / scale });
        }
        if e0.norm() < RECT_SHAPE_TOL * scale || e1.norm() < RECT_SHAPE_TOL * scale {
            return Err(GeometryError::NonPositiveExtent { value: e0.norm().min(e1.norm()) });
        }
        Ok(rect)
    }

    /// Reorders vertices counter-clockwise starting from the smallest corner.
    fn normalize(mut vs: [Vec2; 4]) -> Self {
        // Signed (shoelace) area: negative means clockwise input.
        let mut area = 0.0;
        for i in 0..4 {
            area += cross(vs[i], vs[(i + 1) % 4]);
        }
        if area < 0.0 {
            vs.swap(1, 3);
        }
        let start = (0..4)
            .min_by(|&i, &j| {
                (vs[i].x, vs[i].y)
                    .partial_cmp(&(vs[j].x, vs[j].y))
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap();
        let ordered = [
            vs[start],
            vs[(start + 1) % 4],
            vs[(start + 2) % 4],
            vs[(start + 3) % 4],
        ];
        Self { vertices: ordered }
    }

    /// The four corners, counter-clockwise from the smallest corner.
    pub fn vertices(&self) -> &[Vec2; 4] {
        &self.vertices
    }

    /// Centroid of the rectangle.
    pub fn centroid(&self) -> Vec2 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2] + self.vertices[3]) / 4.0
    }

    /// Edge `i` runs from vertex `i` to vertex `(i + 1) % 4`.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i % 4], self.vertices[(i + 1) % 4])
    }

    /// Side length along the first edge (local width).
    pub fn width(&self) -> f64 {
        (self.vertices[1] - self.vertices[0]).norm()
    }

    /// Side length along the second edge (local height).
    pub fn height(&self) -> f64 {
        (self.vertices[2] - self.vertices[1]).norm()
    }
}

/// Hull membership test, boundary inclusive.
///
/// With edge vectors `u = v2 - v1` and `w = v3 - v2`, the point `x` lies in
/// the rectangle iff `0 <= u . (x - v1) <= u . u` and
/// `0 <= w . (x - v2) <= w . w`.
pub fn hull_contains(rect: &RectRegion, point: Vec2) -> bool {
    let [v1, v2, v3, _] = *rect.vertices();
    let u = v2 - v1;
    let w = v3 - v2;
    let du = u.dot(&(point - v1));
    let dw = w.dot(&(point - v2));
    0.0 <= du && du <= u.dot(&u) && 0.0 <= dw && dw <= w.dot(&w)
}

/// Splits the rectangle into four congruent sub-rectangles at the centroid.
///
/// Sub-region `i` is the quadrant whose distinct corner is vertex `i` of the
/// parent; it is bounded by the two edge midpoints adjacent to that vertex
/// and the centroid.
pub fn partition_subregions(rect: &RectRegion) -> [RectRegion; 4] {
    let vs = rect.vertices();
    let c = rect.centroid();
    core::array::from_fn(|i| {
        let v = vs[i];
        let m_prev = 0.5 * (vs[(i + 3) % 4] + v);
        let m_next = 0.5 * (v + vs[(i + 1) % 4]);
        RectRegion::normalize([v, m_next, c, m_prev])
    })
}

/// Closest point to `p` on the closed segment `[a, b]`.
pub fn project_to_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    if len2 <= 0.0 {
        return a;
    }
    let t = (ab.dot(&(p - a)) / len2).clamp(0.0, 1.0);
    a + t * ab
}

/// An ellipse with semi-axis `a` along the direction `theta` and `b`
/// orthogonal to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Vec2,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    pub fn new(center: Vec2, a: f64, b: f64, theta: f64) -> Result<Self, GeometryError> {
        for ext in [a, b] {
            if !(ext > 0.0) || !ext.is_finite() {
                return Err(GeometryError::NonPositiveExtent { value: ext });
            }
        }
        Ok(Self { center, a, b, theta })
    }

    /// Boundary point at parameter `t`: `center + R(theta) * (a cos t, b sin t)`.
    pub fn boundary_point(&self, t: f64) -> Vec2 {
        self.center + rotation(self.theta) * Vec2::new(self.a * t.cos(), self.b * t.sin())
    }
}

/// Ellipse covering a rectangle: semi-axes are `beta / 2` times the side
/// lengths, aligned with the rectangle. With `beta = 1` the ellipse passes
/// through the four edge midpoints.
///
/// `theta` is the direction of the first edge normalized into `[0, pi)`; for
/// squares (where the axes are interchangeable) it is reduced further into
/// `[0, pi/2)`.
pub fn ellipse_from_rect(rect: &RectRegion, beta: f64) -> Result<Ellipse, GeometryError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(GeometryError::NonPositiveExtent { value: beta });
    }
    let (v1, v2) = rect.edge(0);
    let e = v2 - v1;
    let mut theta = e.y.atan2(e.x).rem_euclid(PI);
    let a = 0.5 * beta * rect.width();
    let b = 0.5 * beta * rect.height();
    if (a - b).abs() <= RECT_SHAPE_TOL * a.max(b) {
        theta = theta.rem_euclid(PI / 2.0);
    }
    Ellipse::new(rect.centroid(), a, b, theta)
}
