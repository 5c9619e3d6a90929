//! The world the planner searches over: objects with grasps, support
//! surfaces and obstacles, placements, stances and collision checking.

mod check;
pub mod collision;
mod object;
mod placement;
mod stance;

pub use check::{collide, first_collision, Contact, GRASP_CLEARANCE_MM};
pub use collision::{CollisionPrimitive, PrimitiveSpec, CONTACT_TOLERANCE_MM};
pub use object::{load_grasps, load_grasps_str, Grasp, GraspSpec, ObjectModel, ObjectSpec};
pub use placement::{enumerate_placements, placement_at, Placement, PlacementGrid};
pub use stance::{FootPlacement, Stance, StancePreset, StanceSpec, CONTACT_HEIGHT_MM};

use crate::kinematics::{KinematicsError, Transform};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error in {path}: {field}: {message}")]
    Parse { path: String, field: String, message: String },
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("invalid stance: {0}")]
    Stance(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl SceneError {
    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        SceneError::Parse {
            path: String::new(),
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            SceneError::Parse { field, message, .. } => {
                SceneError::Parse { path: path.display().to_string(), field, message }
            }
            other => other,
        }
    }
}

/// A face of the object's bounding box, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+z")]
    PosZ,
    #[serde(rename = "-z")]
    NegZ,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::PosX, Face::NegX, Face::PosY, Face::NegY, Face::PosZ, Face::NegZ];

    /// (axis index, sign) of the outward normal.
    pub fn axis(self) -> (usize, f64) {
        match self {
            Face::PosX => (0, 1.0),
            Face::NegX => (0, -1.0),
            Face::PosY => (1, 1.0),
            Face::NegY => (1, -1.0),
            Face::PosZ => (2, 1.0),
            Face::NegZ => (2, -1.0),
        }
    }

    pub fn normal(self) -> Vector3<f64> {
        let (i, s) = self.axis();
        let mut n = Vector3::zeros();
        n[i] = s;
        n
    }

    /// Rotation taking this face's outward normal to world -z.
    pub fn down_rotation(self) -> Transform {
        use std::f64::consts::{FRAC_PI_2, PI};
        let rpy = match self {
            Face::NegZ => [0.0, 0.0, 0.0],
            Face::PosZ => [PI, 0.0, 0.0],
            Face::PosX => [0.0, FRAC_PI_2, 0.0],
            Face::NegX => [0.0, -FRAC_PI_2, 0.0],
            Face::PosY => [-FRAC_PI_2, 0.0, 0.0],
            Face::NegY => [FRAC_PI_2, 0.0, 0.0],
        };
        Transform::from_rpy_translation(rpy, [0.0; 3])
    }
}

impl std::fmt::Display for Face {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Face::PosX => "+x",
            Face::NegX => "-x",
            Face::PosY => "+y",
            Face::NegY => "-y",
            Face::PosZ => "+z",
            Face::NegZ => "-z",
        };
        f.write_str(s)
    }
}

/// A horizontal, axis-aligned support rectangle whose top lies at `center.z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    pub name: String,
    /// centre of the top face, mm
    pub center: [f64; 3],
    /// half sizes along world x and y, mm
    pub half_extents: [f64; 2],
    #[serde(default = "default_thickness")]
    pub thickness: f64,
}

fn default_thickness() -> f64 {
    40.0
}

impl Surface {
    pub fn top_z(&self) -> f64 {
        self.center[2]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() <= self.half_extents[0] && (y - self.center[1]).abs() <= self.half_extents[1]
    }

    pub fn primitive(&self) -> CollisionPrimitive {
        let h = self.thickness / 2.0;
        CollisionPrimitive::cuboid(
            Transform::from_translation(self.center[0], self.center[1], self.center[2] - h),
            [self.half_extents[0], self.half_extents[1], h],
        )
    }

    fn validate(&self) -> Result<(), String> {
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err("center is not finite".into());
        }
        if !(self.half_extents.iter().all(|v| v.is_finite() && *v > 0.0) && self.thickness > 0.0) {
            return Err("half_extents and thickness must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub surfaces: Vec<Surface>,
    pub obstacles: Vec<CollisionPrimitive>,
}

impl Environment {
    pub fn surface(&self, name: &str) -> Option<&Surface> {
        self.surfaces.iter().find(|s| s.name == name)
    }

    /// Surfaces (as slabs) followed by obstacles.
    pub fn primitives(&self) -> Vec<CollisionPrimitive> {
        self.surfaces.iter().map(Surface::primitive).chain(self.obstacles.iter().copied()).collect()
    }

    pub fn from_file(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json_str(&text).map_err(|e| e.with_path(path))
    }

    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        let spec: EnvironmentSpec = serde_json::from_str(text).map_err(SceneError::from_json)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Self, SceneError> {
        let parse = |field: String, message: String| SceneError::Parse { path: String::new(), field, message };
        for (i, s) in spec.surfaces.iter().enumerate() {
            s.validate().map_err(|m| parse(format!("surfaces[{i}]"), m))?;
            if spec.surfaces[..i].iter().any(|o| o.name == s.name) {
                return Err(parse(format!("surfaces[{i}].name"), format!("duplicate surface `{}`", s.name)));
            }
        }
        let obstacles = spec
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_primitive().map_err(|m| parse(format!("obstacles[{i}]"), m)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { surfaces: spec.surfaces.clone(), obstacles })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub surfaces: Vec<Surface>,
    #[serde(default)]
    pub obstacles: Vec<PrimitiveSpec>,
}

/// Convenience: pose from translation and yaw.
pub fn planar_pose(x: f64, y: f64, z: f64, yaw: f64) -> Transform {
    Transform::rot_z(yaw).with_translation(Vector3::new(x, y, z))
}
