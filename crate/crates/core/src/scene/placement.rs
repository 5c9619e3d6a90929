use super::{Face, ObjectModel, SceneError, Surface};
use crate::kinematics::Transform;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Object resting on a surface with one bounding-box face down.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub id: usize,
    pub surface: String,
    pub face: Face,
    pub yaw: f64,
    pub pose: Transform,
    pub stable: bool,
}

/// Cell-centred grid of positions over a surface, times evenly spaced yaws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementGrid {
    pub positions: [usize; 2],
    pub yaws: usize,
}

impl Default for PlacementGrid {
    fn default() -> Self {
        Self { positions: [3, 3], yaws: 4 }
    }
}

impl PlacementGrid {
    pub fn points(&self, surface: &Surface) -> Vec<(f64, f64)> {
        let [nx, ny] = self.positions;
        let [hx, hy] = surface.half_extents;
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let x = surface.center[0] - hx + (i as f64 + 0.5) * 2.0 * hx / nx as f64;
                let y = surface.center[1] - hy + (j as f64 + 0.5) * 2.0 * hy / ny as f64;
                out.push((x, y));
            }
        }
        out
    }

    pub fn yaw_values(&self) -> Vec<f64> {
        (0..self.yaws).map(|k| k as f64 * TAU / self.yaws as f64).collect()
    }
}

/// The placement with `face` down whose face centre lands at (x, y) on the surface.
/// `stable` is false when the CoM is not strictly over the face, the face is not
/// an allowed resting face, or the footprint leaves the surface.
pub fn placement_at(
    object: &ObjectModel,
    surface: &Surface,
    face: Face,
    x: f64,
    y: f64,
    yaw: f64,
) -> Result<Placement, SceneError> {
    let (lo, hi) = object
        .bounds()
        .ok_or_else(|| SceneError::EmptyResult(format!("object `{}` has no geometry to rest on", object.name)))?;
    let rot = Transform::rot_z(yaw).compose(&face.down_rotation());
    let (axis, sign) = face.axis();
    let mut centre = (lo + hi) / 2.0;
    centre[axis] = if sign > 0.0 { hi[axis] } else { lo[axis] };
    let t = Vector3::new(x, y, surface.top_z()) - rot.apply_vector(&centre);
    let pose = rot.with_translation(t);

    let com_over_face =
        (0..3).filter(|&k| k != axis).all(|k| object.local_com[k] > lo[k] && object.local_com[k] < hi[k]);
    let footprint_on_surface =
        corners(&lo, &hi).iter().map(|c| pose.apply_point(c)).all(|p| surface.contains_xy(p.x, p.y));
    let stable = com_over_face && footprint_on_surface && object.resting_faces.contains(&face);
    Ok(Placement { id: 0, surface: surface.name.clone(), face, yaw, pose, stable })
}

fn corners(lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vec<Vector3<f64>> {
    (0..8)
        .map(|i| {
            Vector3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect()
}

/// All stable placements on the grid, numbered in (face, yaw, position) order.
pub fn enumerate_placements(
    object: &ObjectModel,
    surface: &Surface,
    grid: &PlacementGrid,
) -> Result<Vec<Placement>, SceneError> {
    let points = grid.points(surface);
    let yaws = grid.yaw_values();
    if points.is_empty() || yaws.is_empty() {
        return Err(SceneError::EmptyResult(format!("placement grid on `{}` has no points", surface.name)));
    }
    let mut out = Vec::new();
    for face in Face::ALL {
        for &yaw in &yaws {
            for &(x, y) in &points {
                let p = placement_at(object, surface, face, x, y, yaw)?;
                if p.stable {
                    out.push(Placement { id: out.len(), ..p });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(SceneError::EmptyResult(format!("no stable placement of `{}` on `{}`", object.name, surface.name)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::CollisionPrimitive;

    fn block(com: [f64; 3]) -> ObjectModel {
        let mut o = ObjectModel::point_mass(8.0, Vector3::from(com));
        o.primitives
            .push(CollisionPrimitive::cuboid(Transform::from_translation(150.0, 80.0, 150.0), [150.0, 80.0, 150.0]));
        o
    }

    fn table() -> Surface {
        Surface { name: "t".into(), center: [0.0, 0.0, 700.0], half_extents: [2000.0, 2000.0], thickness: 40.0 }
    }

    // Independent CoM-over-face check: rest the box, then test that the
    // world CoM drops inside the world footprint rectangle.
    fn com_over_footprint(o: &ObjectModel, p: &Placement) -> bool {
        let (lo, hi) = o.bounds().unwrap();
        let pts: Vec<_> = corners(&lo, &hi).iter().map(|c| p.pose.apply_point(c)).collect();
        let minz = pts.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        let bottom: Vec<_> = pts.iter().filter(|v| (v.z - minz).abs() < 1e-6).collect();
        let (x0, x1) = bottom.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v.x), a.1.max(v.x)));
        let (y0, y1) = bottom.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v.y), a.1.max(v.y)));
        let c = o.world_com(&p.pose);
        c.x > x0 + 1e-9 && c.x < x1 - 1e-9 && c.y > y0 + 1e-9 && c.y < y1 - 1e-9
    }

    #[test]
    fn uniform_box_rests_on_all_faces() {
        let o = block([150.0, 80.0, 150.0]);
        let ps = enumerate_placements(&o, &table(), &PlacementGrid::default()).unwrap();
        assert_eq!(ps.len(), 6 * 4 * 9);
        for f in Face::ALL {
            assert!(ps.iter().any(|p| p.face == f));
        }
        for p in &ps {
            let (lo, hi) = o.bounds().unwrap();
            let minz = corners(&lo, &hi).iter().map(|c| p.pose.apply_point(c).z).fold(f64::INFINITY, f64::min);
            assert!((minz - 700.0).abs() < 1e-9);
            assert!(com_over_footprint(&o, p));
        }
    }

    #[test]
    fn offset_com_excludes_faces() {
        // CoM beyond the x extent: only the two x faces can carry it.
        let o = block([400.0, 80.0, 150.0]);
        let ps = enumerate_placements(&o, &table(), &PlacementGrid::default()).unwrap();
        let faces: std::collections::BTreeSet<_> = ps.iter().map(|p| p.face).collect();
        assert_eq!(faces.into_iter().collect::<Vec<_>>(), vec![Face::PosX, Face::NegX]);
        for f in Face::ALL {
            let p = placement_at(&o, &table(), f, 0.0, 0.0, 0.3).unwrap();
            assert_eq!(p.stable, com_over_footprint(&o, &p), "{f}");
        }
    }

    #[test]
    fn empty_grid_is_empty_result() {
        let o = block([150.0, 80.0, 150.0]);
        let grid = PlacementGrid { positions: [0, 3], yaws: 4 };
        assert!(matches!(enumerate_placements(&o, &table(), &grid), Err(SceneError::EmptyResult(_))));
    }
}
