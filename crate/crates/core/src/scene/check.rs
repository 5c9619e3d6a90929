use super::collision::{penetration, CollisionPrimitive, CONTACT_TOLERANCE_MM};
use super::ObjectModel;
use crate::kinematics::{Configuration, Hand, KinematicsError, RobotModel, Transform};
use nalgebra::Vector3;

/// Penetration tolerated between a held object and the non-palm links of
/// the hand holding it, mm.
pub const GRASP_CLEARANCE_MM: f64 = 5.0;

/// The first colliding pair found, named for removal logs.
#[derive(Debug, Clone, PartialEq)]
pub enum Contact {
    Links(String, String),
    LinkObject(String),
    LinkEnvironment(String, usize),
    ObjectEnvironment(usize),
}

impl std::fmt::Display for Contact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Contact::Links(a, b) => write!(f, "{a} vs {b}"),
            Contact::LinkObject(a) => write!(f, "{a} vs object"),
            Contact::LinkEnvironment(a, i) => write!(f, "{a} vs environment[{i}]"),
            Contact::ObjectEnvironment(i) => write!(f, "object vs environment[{i}]"),
        }
    }
}

struct Placed {
    prim: CollisionPrimitive,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Placed {
    fn new(prim: CollisionPrimitive) -> Self {
        let (lo, hi) = prim.aabb();
        Self { prim, lo, hi }
    }

    fn hits(&self, other: &Placed, tolerance: f64) -> bool {
        // AABBs separated by more than the tolerance cannot penetrate beyond it
        let apart = (0..3).any(|k| self.lo[k] > other.hi[k] || other.lo[k] > self.hi[k]);
        !apart && penetration(&self.prim, &other.prim) > tolerance
    }
}

/// True iff a non-adjacent link pair, a link and the object (the palms in
/// `grasping` excluded), a link and the environment, or the object and the
/// environment penetrate by more than the contact tolerance.
pub fn collide(
    model: &RobotModel,
    q: &Configuration,
    object: Option<(&ObjectModel, &Transform)>,
    grasping: &[Hand],
    environment: &[CollisionPrimitive],
) -> Result<bool, KinematicsError> {
    let p = model.to_posture(q)?;
    let frames = model.link_frames(&p);
    Ok(first_collision(model, &frames, object, grasping, environment).is_some())
}

/// Like [`collide`] on precomputed link frames, returning the first pair.
pub fn first_collision(
    model: &RobotModel,
    frames: &[Transform],
    object: Option<(&ObjectModel, &Transform)>,
    grasping: &[Hand],
    environment: &[CollisionPrimitive],
) -> Option<Contact> {
    let links = model.links();
    let placed: Vec<Vec<Placed>> = links
        .iter()
        .zip(frames)
        .map(|(l, f)| l.collision.iter().map(|c| Placed::new(c.transformed(f))).collect())
        .collect();
    let env: Vec<Placed> = environment.iter().copied().map(Placed::new).collect();
    let any = |a: &[Placed], b: &[Placed], tol: f64| a.iter().any(|x| b.iter().any(|y| x.hits(y, tol)));

    for a in 0..links.len() {
        if placed[a].is_empty() {
            continue;
        }
        for b in a + 1..links.len() {
            if placed[b].is_empty() || model.is_adjacent(a, b) || model.is_excluded(a, b) {
                continue;
            }
            if any(&placed[a], &placed[b], CONTACT_TOLERANCE_MM) {
                return Some(Contact::Links(links[a].name.clone(), links[b].name.clone()));
            }
        }
    }

    if let Some((obj, pose)) = object {
        let held: Vec<Placed> = obj.world_primitives(pose).into_iter().map(Placed::new).collect();
        let palms: Vec<usize> = grasping.iter().map(|&h| model.hand_link(h)).collect();
        let arm_links: Vec<usize> =
            grasping.iter().flat_map(|&h| model.arm_joints(h)).map(|j| model.joint_link(j)).collect();
        for (i, prims) in placed.iter().enumerate() {
            if prims.is_empty() || palms.contains(&i) {
                continue;
            }
            let tol = if arm_links.contains(&i) { GRASP_CLEARANCE_MM } else { CONTACT_TOLERANCE_MM };
            if any(prims, &held, tol) {
                return Some(Contact::LinkObject(links[i].name.clone()));
            }
        }
        for (k, e) in env.iter().enumerate() {
            if held.iter().any(|h| h.hits(e, CONTACT_TOLERANCE_MM)) {
                return Some(Contact::ObjectEnvironment(k));
            }
        }
    }

    for (i, prims) in placed.iter().enumerate() {
        for (k, e) in env.iter().enumerate() {
            if prims.iter().any(|p| p.hits(e, CONTACT_TOLERANCE_MM)) {
                return Some(Contact::LinkEnvironment(links[i].name.clone(), k));
            }
        }
    }
    None
}
