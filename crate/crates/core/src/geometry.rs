//! Planar convex geometry on the ground plane.
//!
//! All coordinates are millimetres. Orientation tests use a fixed epsilon of
//! [`ORIENTATION_EPS`]; inputs are physical foot corners, well away from the
//! degenerate configurations that would call for exact predicates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance (mm²-scaled cross products and mm distances) for orientation tests.
pub const ORIENTATION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

/// A point on the ground plane, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    /// Builds a point, rejecting NaN and infinities.
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::NonFinite { x, y })
        }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;

    fn sub(self, other: Point2) -> Point2 {
        Point2 { x: self.x - other.x, y: self.y - other.y }
    }
}

/// z-component of (b - a) × (c - a); positive when a, b, c turn counter-clockwise.
pub fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Euclidean distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let ap = p - a;
    let t = ((ap.x * ab.x + ap.y * ab.y) / len2).clamp(0.0, 1.0);
    let closest = Point2 { x: a.x + t * ab.x, y: a.y + t * ab.y };
    p.distance(closest)
}

/// A strictly convex polygon with counter-clockwise vertices, starting at the
/// lexicographically smallest vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates an explicit vertex list. The list must already be strictly
    /// convex and counter-clockwise; it is rotated into canonical order.
    pub fn from_ccw(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::DegenerateInput(format!("polygon needs at least 3 vertices, got {n}")));
        }
        for p in &vertices {
            Point2::new(p.x, p.y)?;
        }
        for i in 0..n {
            let turn = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if turn <= ORIENTATION_EPS {
                return Err(GeometryError::DegenerateInput(format!(
                    "vertex {} is not a strict left turn",
                    (i + 1) % n
                )));
            }
        }
        // Strict left turns everywhere still admit a star polygon winding twice.
        let mut winding = 0.0;
        for i in 0..n {
            let a = vertices[i] - vertices[(i + n - 1) % n];
            let b = vertices[(i + 1) % n] - vertices[i];
            winding += (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y);
        }
        if (winding - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(GeometryError::DegenerateInput("polygon winds more than once".into()));
        }
        let start = (0..n).min_by(|&i, &j| lex_cmp(vertices[i], vertices[j])).unwrap_or(0);
        let mut vertices = vertices;
        vertices.rotate_left(start);
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Iterates over the directed edges `(v[i], v[i+1])`.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Closed-set containment: boundary points are inside.
    pub fn contains(&self, p: Point2) -> bool {
        self.edges().all(|(a, b)| {
            let len = a.distance(b);
            cross(a, b, p) / len >= -ORIENTATION_EPS
        })
    }

    /// Distance from `p` to the boundary, positive inside, negative outside,
    /// zero on the boundary.
    pub fn signed_margin(&self, p: Point2) -> f64 {
        let d = self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
        if d <= ORIENTATION_EPS {
            0.0
        } else if self.contains(p) {
            d
        } else {
            -d
        }
    }

    /// Minimum width over all edge directions. For a convex polygon the
    /// minimum-width strip has one side flush with an edge.
    pub fn min_width(&self) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let len = a.distance(b);
                self.vertices.iter().map(|&v| cross(a, b, v) / len).fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on `signed_margin` over the whole plane (half the minimum
    /// width, which bounds the inradius).
    pub fn max_margin_bound(&self) -> f64 {
        0.5 * self.min_width()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> ConvexPolygon {
        ConvexPolygon { vertices: self.vertices.iter().map(|v| Point2 { x: v.x + dx, y: v.y + dy }).collect() }
    }

    pub fn area(&self) -> f64 {
        let o = self.vertices[0];
        self.vertices.windows(2).map(|w| cross(o, w[0], w[1])).sum::<f64>() * 0.5
    }
}

fn lex_cmp(a: Point2, b: Point2) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Convex hull by monotone chain. Interior and collinear points are dropped;
/// the output starts at the lexicographically smallest point and runs CCW.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon, GeometryError> {
    for p in points {
        Point2::new(p.x, p.y)?;
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| lex_cmp(*a, *b));
    pts.dedup_by(|a, b| a.distance(*b) <= ORIENTATION_EPS);
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!("need at least 3 distinct points, got {}", pts.len())));
    }

    // Exact monotone chain first; near-collinear vertices are dropped after,
    // since a tolerant turn test is not consistent with the exact sort order.
    let turns_left = |hull: &[Point2], p: Point2| {
        let n = hull.len();
        cross(hull[n - 2], hull[n - 1], p) > 0.0
    };

    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && !turns_left(&lower, p) {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && !turns_left(&upper, p) {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    loop {
        let n = lower.len();
        if n < 3 {
            break;
        }
        // Distance of each vertex from the chord joining its neighbours, mm.
        let flat = (0..n).find(|&i| {
            let (a, b, c) = (lower[(i + n - 1) % n], lower[i], lower[(i + 1) % n]);
            let base = a.distance(c);
            base > 0.0 && cross(a, c, b).abs() / base <= ORIENTATION_EPS
        });
        match flat {
            Some(i) => {
                lower.remove(i);
            }
            None => break,
        }
    }
    if lower.len() < 3 {
        return Err(GeometryError::DegenerateInput("all points are collinear".into()));
    }
    Ok(ConvexPolygon { vertices: lower })
}
