//! Grasp rectangles in center/angle/size form and in corner form.
//!
//! Image-plane coordinates: `x` is the column, `y` the row. Angles are
//! measured counter-clockwise from the +x axis in the `(x, y)` coordinate
//! system as written, so a positive angle rotates +x toward +y. On a
//! display with rows growing downward this appears clockwise.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Point2, Vector2};

use super::GeometryError;

/// Default relative tolerance used by [`corners_to_rect5`].
pub const DEFAULT_RECT_TOLERANCE: f64 = 1e-6;

/// Folds an angle into `[-pi/2, pi/2)`.
///
/// A grasp rectangle rotated by half a turn is the same rectangle, so
/// angles are only meaningful modulo `pi`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta - PI * ((theta + FRAC_PI_2) / PI).floor();
    // floor() can land one ulp short of the half-open upper bound.
    if t >= FRAC_PI_2 {
        t - PI
    } else if t < -FRAC_PI_2 {
        t + PI
    } else {
        t
    }
}

/// Unsigned orientation difference between two rectangle angles, modulo
/// `pi` and folded into `[0, pi/2]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    if d > FRAC_PI_2 {
        PI - d
    } else {
        d
    }
}

/// Grasp rectangle as `(x, y, theta, w, h)`.
///
/// `w` runs along the gripper opening axis (the rotated x axis), `h` along
/// the jaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspRect5 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub w: f64,
    pub h: f64,
}

impl GraspRect5 {
    /// Builds a rectangle, normalizing `theta` into `[-pi/2, pi/2)`.
    pub fn new(x: f64, y: f64, theta: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if ![x, y, theta, w, h].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::NonPositiveSize { w, h });
        }
        Ok(Self {
            x,
            y,
            theta: normalize_angle(theta),
            w,
            h,
        })
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_corners(&self) -> GraspRect8 {
        rect5_to_corners(self)
    }
}

/// Grasp rectangle as four corners with counter-clockwise winding
/// (positive signed area).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspRect8 {
    corners: [Point2<f64>; 4],
}

impl GraspRect8 {
    /// Accepts four corners of a convex quadrilateral in either winding.
    ///
    /// Clockwise input is re-wound by reversing traversal direction while
    /// keeping the first edge first, so the edge `c0 -> c1` still spans the
    /// gripper opening.
    pub fn new(corners: [Point2<f64>; 4]) -> Result<Self, GeometryError> {
        if corners.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let area = signed_area(&corners);
        if area.abs() < MIN_POLYGON_AREA {
            return Err(GeometryError::DegeneratePolygon { area: area.abs() });
        }
        let corners = if area < 0.0 {
            let [c0, c1, c2, c3] = corners;
            [c1, c0, c3, c2]
        } else {
            corners
        };
        if !is_convex_ccw(&corners) {
            return Err(GeometryError::NotConvex);
        }
        Ok(Self { corners })
    }

    pub fn from_xy(xy: [[f64; 2]; 4]) -> Result<Self, GeometryError> {
        Self::new(xy.map(|[x, y]| Point2::new(x, y)))
    }

    pub fn corners(&self) -> &[Point2<f64>; 4] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    pub fn centroid(&self) -> Point2<f64> {
        let sum = self
            .corners
            .iter()
            .fold(Vector2::zeros(), |acc, c| acc + c.coords);
        Point2::from(sum / 4.0)
    }
}

/// Polygons with less area than this are treated as degenerate.
pub const MIN_POLYGON_AREA: f64 = 1e-12;

pub fn rect5_to_corners(r: &GraspRect5) -> GraspRect8 {
    let (s, c) = r.theta.sin_cos();
    let (hw, hh) = (r.w / 2.0, r.h / 2.0);
    let local = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
    let corners = local.map(|(dx, dy)| Point2::new(r.x + c * dx - s * dy, r.y + s * dx + c * dy));
    // w, h > 0 makes this counter-clockwise by construction.
    GraspRect8 { corners }
}

/// Recovers the 5-D form of a rectangle given as corners, with the default
/// tolerance.
pub fn corners_to_rect5(c: &GraspRect8) -> Result<GraspRect5, GeometryError> {
    corners_to_rect5_with_tolerance(c, DEFAULT_RECT_TOLERANCE)
}

/// Recovers the 5-D form of a rectangle given as corners.
///
/// The first edge `c0 -> c1` gives the width direction. Opposite sides must
/// agree in length, and the diagonals must agree in length, within `tol`
/// relative to the longest side; otherwise the quadrilateral is not a
/// rectangle.
pub fn corners_to_rect5_with_tolerance(
    c: &GraspRect8,
    tol: f64,
) -> Result<GraspRect5, GeometryError> {
    let p = &c.corners;
    let e0 = p[1] - p[0];
    let e1 = p[2] - p[1];
    let e2 = p[3] - p[2];
    let e3 = p[0] - p[3];
    let (l0, l1, l2, l3) = (e0.norm(), e1.norm(), e2.norm(), e3.norm());
    let scale = l0.max(l1).max(l2).max(l3);
    let d0 = (p[2] - p[0]).norm();
    let d1 = (p[3] - p[1]).norm();
    let skew = (l0 - l2)
        .abs()
        .max((l1 - l3).abs())
        .max((d0 - d1).abs());
    if skew > tol * scale {
        return Err(GeometryError::NotARectangle {
            relative_skew: skew / scale,
        });
    }
    // e0 and -e2 point the same way on a rectangle; averaging them cancels
    // opposite-side rounding.
    let width_dir = e0 - e2;
    let theta = width_dir.y.atan2(width_dir.x);
    let center = c.centroid();
    GraspRect5::new(
        center.x,
        center.y,
        theta,
        (l0 + l2) / 2.0,
        (l1 + l3) / 2.0,
    )
}

/// Shoelace signed area; positive for counter-clockwise polygons.
pub fn signed_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice / 2.0
}

fn cross(o: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn is_convex_ccw(poly: &[Point2<f64>]) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= 0.0)
}

/// Returns the polygon with counter-clockwise winding, validating that it is
/// convex and has non-negligible area.
pub fn ccw_convex(poly: &[Point2<f64>]) -> Result<Vec<Point2<f64>>, GeometryError> {
    if poly.len() < 3 {
        return Err(GeometryError::DegeneratePolygon { area: 0.0 });
    }
    let area = signed_area(poly);
    if area.abs() < MIN_POLYGON_AREA {
        return Err(GeometryError::DegeneratePolygon { area: area.abs() });
    }
    let mut out = poly.to_vec();
    if area < 0.0 {
        out.reverse();
    }
    if !is_convex_ccw(&out) {
        return Err(GeometryError::NotConvex);
    }
    Ok(out)
}

/// Point-in-convex-polygon test for a counter-clockwise polygon. Points on
/// the boundary count as inside.
pub fn convex_contains(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= 0.0)
}

/// Clips `subject` against the convex, counter-clockwise `clip` polygon
/// (Sutherland-Hodgman).
pub fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let mut prev = input[input.len() - 1];
        let mut prev_side = cross(a, b, prev);
        for &cur in &input {
            let cur_side = cross(a, b, cur);
            if cur_side >= 0.0 {
                if prev_side < 0.0 {
                    output.push(edge_crossing(prev, cur, prev_side, cur_side));
                }
                output.push(cur);
            } else if prev_side >= 0.0 {
                output.push(edge_crossing(prev, cur, prev_side, cur_side));
            }
            prev = cur;
            prev_side = cur_side;
        }
    }
    output
}

fn edge_crossing(p: Point2<f64>, q: Point2<f64>, sp: f64, sq: f64) -> Point2<f64> {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

/// Area of the intersection of two convex polygons.
///
/// Either winding is accepted. The result is clamped into
/// `[0, min(area(a), area(b))]`.
pub fn polygon_intersection_area(
    a: &[Point2<f64>],
    b: &[Point2<f64>],
) -> Result<f64, GeometryError> {
    let a = ccw_convex(a)?;
    let b = ccw_convex(b)?;
    let area_a = signed_area(&a);
    let area_b = signed_area(&b);
    let clipped = clip_convex(&a, &b);
    let inter = signed_area(&clipped).max(0.0);
    Ok(inter.min(area_a).min(area_b))
}

/// Intersection-over-union of two convex polygons.
pub fn polygon_jaccard(a: &[Point2<f64>], b: &[Point2<f64>]) -> Result<f64, GeometryError> {
    let a = ccw_convex(a)?;
    let b = ccw_convex(b)?;
    let area_a = signed_area(&a);
    let area_b = signed_area(&b);
    let inter = signed_area(&clip_convex(&a, &b))
        .max(0.0)
        .min(area_a)
        .min(area_b);
    let union = area_a + area_b - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Jaccard index `|U ∩ V| / |U ∪ V|` of two grasp rectangles.
pub fn jaccard(u: &GraspRect8, v: &GraspRect8) -> Result<f64, GeometryError> {
    polygon_jaccard(u.corners(), v.corners())
}
