use super::collision::{CollisionPrimitive, PrimitiveSpec};
use super::{Face, SceneError};
use crate::kinematics::{Hand, Transform, TransformSpec};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A grasp: where the object sits in the hand frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    pub id: usize,
    pub name: String,
    pub hand: Hand,
    /// Object pose in the hand frame, so `object_world = hand_world ∘ transform`.
    pub transform: Transform,
    /// Unit direction (object frame) along which the hand closes in.
    pub approach: Vector3<f64>,
}

impl Grasp {
    /// Hand pose that holds an object at `object_pose`.
    pub fn hand_target(&self, object_pose: &Transform) -> Transform {
        object_pose.compose(&self.transform.inverse())
    }

    pub fn object_pose(&self, hand_pose: &Transform) -> Transform {
        hand_pose.compose(&self.transform)
    }
}

#[derive(Debug, Clone)]
pub struct ObjectModel {
    pub name: String,
    /// kg
    pub mass: f64,
    /// mm, object frame
    pub local_com: Vector3<f64>,
    pub primitives: Vec<CollisionPrimitive>,
    pub resting_faces: Vec<Face>,
    pub grasps: Vec<Grasp>,
}

impl ObjectModel {
    /// A mass point with no geometry or grasps.
    pub fn point_mass(mass: f64, local_com: Vector3<f64>) -> Self {
        Self {
            name: "point".into(),
            mass,
            local_com,
            primitives: Vec::new(),
            resting_faces: Face::ALL.to_vec(),
            grasps: Vec::new(),
        }
    }

    /// Axis-aligned bounds of all primitives, object frame.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.primitives.iter().map(|p| p.aabb()).reduce(|(lo, hi), (l, h)| (lo.inf(&l), hi.sup(&h)))
    }

    pub fn world_com(&self, pose: &Transform) -> Vector3<f64> {
        pose.apply_point(&self.local_com)
    }

    pub fn world_primitives(&self, pose: &Transform) -> Vec<CollisionPrimitive> {
        self.primitives.iter().map(|p| p.transformed(pose)).collect()
    }

    pub fn grasps_for(&self, hand: Hand) -> impl Iterator<Item = &Grasp> {
        self.grasps.iter().filter(move |g| g.hand == hand)
    }

    pub fn from_file(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json_str(&text).map_err(|e| e.with_path(path))
    }

    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        let spec: ObjectSpec = serde_json::from_str(text).map_err(SceneError::from_json)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &ObjectSpec) -> Result<Self, SceneError> {
        let parse = |field: String, message: String| SceneError::Parse { path: String::new(), field, message };
        if !(spec.mass.is_finite() && spec.mass >= 0.0) {
            return Err(parse("mass".into(), format!("must be >= 0, got {}", spec.mass)));
        }
        if !spec.com.iter().all(|v| v.is_finite()) {
            return Err(parse("com".into(), "not finite".into()));
        }
        let primitives = spec
            .primitives
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_primitive().map_err(|m| parse(format!("primitives[{i}]"), m)))
            .collect::<Result<Vec<_>, _>>()?;
        let grasps = grasps_from_specs(&spec.grasps)?;
        let resting_faces = if spec.resting_faces.is_empty() { Face::ALL.to_vec() } else { spec.resting_faces.clone() };
        Ok(Self {
            name: spec.name.clone(),
            mass: spec.mass,
            local_com: Vector3::from(spec.com),
            primitives,
            resting_faces,
            grasps,
        })
    }
}

fn grasps_from_specs(specs: &[GraspSpec]) -> Result<Vec<Grasp>, SceneError> {
    let parse = |field: String, message: String| SceneError::Parse { path: String::new(), field, message };
    specs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let hand_pose = g.hand_pose.to_transform().map_err(|m| parse(format!("grasps[{i}].hand_pose"), m))?;
            let a = Vector3::from(g.approach);
            if !a.iter().all(|v| v.is_finite()) || (a.norm() - 1.0).abs() > 1e-6 {
                return Err(parse(format!("grasps[{i}].approach"), "must be a unit vector".into()));
            }
            Ok(Grasp {
                id: i,
                name: g.name.clone().unwrap_or_else(|| format!("{}_{i}", g.hand)),
                hand: g.hand,
                transform: hand_pose.inverse(),
                approach: a,
            })
        })
        .collect()
}

/// Reads and validates the grasp list of an object file.
pub fn load_grasps(path: &Path) -> Result<Vec<Grasp>, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SceneError::Io { path: path.display().to_string(), message: e.to_string() })?;
    load_grasps_str(&text).map_err(|e| e.with_path(path))
}

pub fn load_grasps_str(text: &str) -> Result<Vec<Grasp>, SceneError> {
    let spec: ObjectSpec = serde_json::from_str(text).map_err(SceneError::from_json)?;
    let grasps = grasps_from_specs(&spec.grasps)?;
    if grasps.is_empty() {
        return Err(SceneError::EmptyResult("object file declares no grasps".into()));
    }
    Ok(grasps)
}

// ---- file schema ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub mass: f64,
    pub com: [f64; 3],
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub resting_faces: Vec<Face>,
    #[serde(default)]
    pub grasps: Vec<GraspSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub hand: Hand,
    /// Pose of the hand frame expressed in the object frame.
    pub hand_pose: TransformSpec,
    pub approach: [f64; 3],
}
