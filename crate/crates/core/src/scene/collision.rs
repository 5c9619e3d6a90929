//! Sphere / capsule / box primitives and analytic pair tests.
//!
//! Every pair test reports a signed *penetration*: positive when the shapes
//! overlap (an estimate of overlap depth), negative when they are apart.
//! Two primitives intersect when the penetration exceeds the contact
//! tolerance, so resting contact (an object sitting on a table) is not a
//! collision.

use crate::kinematics::{Transform, TransformSpec};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Penetration (mm) tolerated before a pair counts as colliding.
pub const CONTACT_TOLERANCE_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionPrimitive {
    Sphere { center: Vector3<f64>, radius: f64 },
    Capsule { a: Vector3<f64>, b: Vector3<f64>, radius: f64 },
    Box { pose: Transform, half_extents: Vector3<f64> },
}

impl CollisionPrimitive {
    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        Self::Sphere { center: Vector3::from(center), radius }
    }

    pub fn capsule(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        Self::Capsule { a: Vector3::from(a), b: Vector3::from(b), radius }
    }

    pub fn cuboid(pose: Transform, half_extents: [f64; 3]) -> Self {
        Self::Box { pose, half_extents: Vector3::from(half_extents) }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::Sphere { center, radius } => {
                finite(center)?;
                positive(*radius, "sphere radius")
            }
            Self::Capsule { a, b, radius } => {
                finite(a)?;
                finite(b)?;
                positive(*radius, "capsule radius")
            }
            Self::Box { pose, half_extents } => {
                if !pose.is_valid() {
                    return Err("box pose is not a rigid transform".into());
                }
                for h in half_extents.iter() {
                    positive(*h, "box half extent")?;
                }
                Ok(())
            }
        }
    }

    /// The primitive expressed in the frame that `t` maps into.
    pub fn transformed(&self, t: &Transform) -> Self {
        match *self {
            Self::Sphere { center, radius } => Self::Sphere { center: t.apply_point(&center), radius },
            Self::Capsule { a, b, radius } => Self::Capsule { a: t.apply_point(&a), b: t.apply_point(&b), radius },
            Self::Box { pose, half_extents } => Self::Box { pose: t.compose(&pose), half_extents },
        }
    }

    /// Axis-aligned bounds (min, max) in the primitive's current frame.
    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Self::Sphere { center, radius } => {
                let r = Vector3::repeat(*radius);
                (center - r, center + r)
            }
            Self::Capsule { a, b, radius } => {
                let r = Vector3::repeat(*radius);
                (a.inf(b) - r, a.sup(b) + r)
            }
            Self::Box { pose, half_extents } => {
                let extent = pose.rotation.abs() * half_extents;
                (pose.translation - extent, pose.translation + extent)
            }
        }
    }
}

fn finite(v: &Vector3<f64>) -> Result<(), String> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err("non-finite coordinate".into())
    }
}

fn positive(v: f64, what: &str) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{what} must be positive, got {v}"))
    }
}

/// Signed penetration depth between two primitives (mm). Symmetric in its arguments.
pub fn penetration(p: &CollisionPrimitive, q: &CollisionPrimitive) -> f64 {
    use CollisionPrimitive::*;
    match (p, q) {
        (Sphere { center: c1, radius: r1 }, Sphere { center: c2, radius: r2 }) => r1 + r2 - (c1 - c2).norm(),
        (Sphere { center, radius: rs }, Capsule { a, b, radius: rc })
        | (Capsule { a, b, radius: rc }, Sphere { center, radius: rs }) => {
            rs + rc - point_segment_distance(center, a, b)
        }
        (Capsule { a: a1, b: b1, radius: r1 }, Capsule { a: a2, b: b2, radius: r2 }) => {
            r1 + r2 - segment_segment_distance(a1, b1, a2, b2)
        }
        (Sphere { center, radius }, Box { pose, half_extents })
        | (Box { pose, half_extents }, Sphere { center, radius }) => {
            let local = pose.inverse().apply_point(center);
            radius - box_sdf(&local, half_extents)
        }
        (Capsule { a, b, radius }, Box { pose, half_extents })
        | (Box { pose, half_extents }, Capsule { a, b, radius }) => {
            let inv = pose.inverse();
            let (la, lb) = (inv.apply_point(a), inv.apply_point(b));
            radius - segment_box_min_sdf(&la, &lb, half_extents)
        }
        (Box { pose: p1, half_extents: h1 }, Box { pose: p2, half_extents: h2 }) => box_box_penetration(p1, h1, p2, h2),
    }
}

pub fn intersects(p: &CollisionPrimitive, q: &CollisionPrimitive, tolerance: f64) -> bool {
    penetration(p, q) > tolerance
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `p1-q1` and `p2-q2`.
pub fn segment_segment_distance(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-12;

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Signed distance from a point (box frame) to an axis-aligned box centred at the origin.
pub fn box_sdf(p: &Vector3<f64>, half_extents: &Vector3<f64>) -> f64 {
    let q = p.abs() - half_extents;
    let outside = q.sup(&Vector3::zeros()).norm();
    let inside = q.max().min(0.0);
    outside + inside
}

/// Minimum of the box SDF along a segment. The SDF of a convex set is convex,
/// so a golden-section search on the segment parameter finds the minimum.
fn segment_box_min_sdf(a: &Vector3<f64>, b: &Vector3<f64>, h: &Vector3<f64>) -> f64 {
    let f = |t: f64| box_sdf(&(a + (b - a) * t), h);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(0.0)).min(f(1.0))
}

/// Separating-axis test over the 15 candidate axes. Returns the smallest
/// overlap when all axes overlap, otherwise minus the largest separation.
fn box_box_penetration(p1: &Transform, h1: &Vector3<f64>, p2: &Transform, h2: &Vector3<f64>) -> f64 {
    let axes1: [Vector3<f64>; 3] =
        [p1.rotation.column(0).into(), p1.rotation.column(1).into(), p1.rotation.column(2).into()];
    let axes2: [Vector3<f64>; 3] =
        [p2.rotation.column(0).into(), p2.rotation.column(1).into(), p2.rotation.column(2).into()];
    let d = p2.translation - p1.translation;

    let mut candidates: Vec<Vector3<f64>> = Vec::with_capacity(15);
    candidates.extend_from_slice(&axes1);
    candidates.extend_from_slice(&axes2);
    for u in &axes1 {
        for v in &axes2 {
            let c = u.cross(v);
            // parallel edge pairs give no new axis
            if c.norm_squared() > 1e-12 {
                candidates.push(c.normalize());
            }
        }
    }

    let mut min_overlap = f64::INFINITY;
    let mut max_separation = f64::NEG_INFINITY;
    for axis in &candidates {
        let r1: f64 = (0..3).map(|i| h1[i] * axes1[i].dot(axis).abs()).sum();
        let r2: f64 = (0..3).map(|i| h2[i] * axes2[i].dot(axis).abs()).sum();
        let gap = d.dot(axis).abs() - r1 - r2;
        if gap > 0.0 {
            max_separation = max_separation.max(gap);
        } else {
            min_overlap = min_overlap.min(-gap);
        }
    }
    if max_separation > f64::NEG_INFINITY {
        -max_separation
    } else {
        min_overlap
    }
}

/// File form of a primitive (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    Box { pose: TransformSpec, half_extents: [f64; 3] },
}

impl PrimitiveSpec {
    pub fn to_primitive(&self) -> Result<CollisionPrimitive, String> {
        let prim = match self {
            Self::Sphere { center, radius } => CollisionPrimitive::sphere(*center, *radius),
            Self::Capsule { a, b, radius } => CollisionPrimitive::capsule(*a, *b, *radius),
            Self::Box { pose, half_extents } => CollisionPrimitive::cuboid(pose.to_transform()?, *half_extents),
        };
        prim.validate()?;
        Ok(prim)
    }

    pub fn from_primitive(p: &CollisionPrimitive) -> Self {
        match p {
            CollisionPrimitive::Sphere { center, radius } => Self::Sphere { center: (*center).into(), radius: *radius },
            CollisionPrimitive::Capsule { a, b, radius } => {
                Self::Capsule { a: (*a).into(), b: (*b).into(), radius: *radius }
            }
            CollisionPrimitive::Box { pose, half_extents } => {
                Self::Box { pose: TransformSpec::from_transform(pose), half_extents: (*half_extents).into() }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spheres_overlap_or_not() {
        let a = CollisionPrimitive::sphere([0.0, 0.0, 0.0], 60.0);
        let b = CollisionPrimitive::sphere([100.0, 0.0, 0.0], 60.0);
        assert!(intersects(&a, &b, CONTACT_TOLERANCE_MM));
        let a = CollisionPrimitive::sphere([0.0, 0.0, 0.0], 40.0);
        let b = CollisionPrimitive::sphere([100.0, 0.0, 0.0], 40.0);
        assert!(!intersects(&a, &b, CONTACT_TOLERANCE_MM));
        assert!((penetration(&a, &b) + 20.0).abs() < 1e-12);
    }

    #[test]
    fn resting_contact_is_not_collision() {
        let table = CollisionPrimitive::cuboid(Transform::from_translation(0.0, 0.0, -20.0), [300.0, 300.0, 20.0]);
        let block = CollisionPrimitive::cuboid(Transform::from_translation(0.0, 0.0, 50.0), [50.0, 50.0, 50.0]);
        assert!(penetration(&table, &block).abs() < 1e-9);
        assert!(!intersects(&table, &block, CONTACT_TOLERANCE_MM));
        let sunk = CollisionPrimitive::cuboid(Transform::from_translation(0.0, 0.0, 45.0), [50.0, 50.0, 50.0]);
        assert!(intersects(&table, &sunk, CONTACT_TOLERANCE_MM));
    }

    #[test]
    fn rotated_boxes_use_cross_axes() {
        // Two boxes whose face axes all overlap but an edge-edge axis separates them.
        let a = CollisionPrimitive::cuboid(Transform::identity(), [10.0, 10.0, 10.0]);
        let rot = Transform::from_rpy_translation(
            [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4],
            [0.0, 0.0, 0.0],
        );
        let b = CollisionPrimitive::cuboid(rot.with_translation(Vector3::new(21.0, 21.0, 0.0)), [10.0, 10.0, 10.0]);
        let pen = penetration(&a, &b);
        let pen_rev = penetration(&b, &a);
        assert!((pen - pen_rev).abs() < 1e-9);
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_segment_distance(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(10.0, 0.0, 0.0),
            &Vector3::new(5.0, 3.0, -5.0),
            &Vector3::new(5.0, 3.0, 5.0),
        );
        assert!((d - 3.0).abs() < 1e-12);
        // parallel
        let d = segment_segment_distance(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(10.0, 0.0, 0.0),
            &Vector3::new(12.0, 4.0, 0.0),
            &Vector3::new(20.0, 4.0, 0.0),
        );
        assert!((d - (4.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn box_sdf_inside_and_outside() {
        let h = Vector3::new(10.0, 20.0, 30.0);
        assert_eq!(box_sdf(&Vector3::zeros(), &h), -10.0);
        assert_eq!(box_sdf(&Vector3::new(13.0, 0.0, 0.0), &h), 3.0);
        assert!((box_sdf(&Vector3::new(13.0, 24.0, 0.0), &h) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_primitives_rejected() {
        assert!(PrimitiveSpec::Sphere { center: [0.0; 3], radius: 0.0 }.to_primitive().is_err());
        assert!(PrimitiveSpec::Box { pose: TransformSpec::default(), half_extents: [1.0, -1.0, 1.0] }
            .to_primitive()
            .is_err());
    }
}
