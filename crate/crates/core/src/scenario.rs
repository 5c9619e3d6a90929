//! Scenario files: which robot, world, object and stance to use, the start
//! and goal placements, the threshold and the sampler settings.

use crate::estimator::{HandChoice, SamplerParams};
use crate::geometry::ConvexPolygon;
use crate::kinematics::{KinematicsError, RobotModel, Transform, TransformSpec};
use crate::scene::{
    enumerate_placements, placement_at, Environment, Face, ObjectModel, Placement, PlacementGrid, SceneError, Stance,
    StancePreset, StanceSpec,
};
use crate::stability::support_polygon;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("parse error in {path}: {field}: {message}")]
    Parse { path: String, field: String, message: String },
    #[error("{path}: {source}")]
    Scene { path: String, source: SceneError },
    #[error("{path}: {source}")]
    Kinematics { path: String, source: KinematicsError },
}

/// Where to put the object: a face-down pose on a named surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSelector {
    pub surface: String,
    pub face: Face,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StanceChoice {
    Preset(StancePreset),
    Custom(StanceSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub robot: PathBuf,
    pub environment: PathBuf,
    pub object: PathBuf,
    pub stance: StanceChoice,
    pub start: PlacementSelector,
    pub goal: PlacementSelector,
    #[serde(default)]
    pub intermediate_surfaces: Vec<String>,
    #[serde(default)]
    pub placement_grid: PlacementGrid,
    /// In-air object poses where the hands may pass the object.
    #[serde(default)]
    pub handover_poses: Vec<TransformSpec>,
    pub threshold_mm: f64,
    #[serde(default)]
    pub hand_configuration: HandChoice,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: RobotModel,
    pub environment: Environment,
    pub object: ObjectModel,
    pub stance: Stance,
    pub polygon: ConvexPolygon,
    pub start: Placement,
    pub goal: Placement,
    /// Stable placements on the intermediate surfaces, ids after start (0) and goal (1).
    pub intermediate: Vec<Placement>,
    pub handover_poses: Vec<Transform>,
    pub threshold: f64,
}

impl Scenario {
    /// Start, goal, then intermediate placements; index equals placement id.
    pub fn placements(&self) -> Vec<&Placement> {
        [&self.start, &self.goal].into_iter().chain(self.intermediate.iter()).collect()
    }

    pub fn with_threshold(&self, threshold: f64) -> Scenario {
        let mut s = self.clone();
        s.threshold = threshold;
        s.spec.threshold_mm = threshold;
        s
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = read(path)?;
    let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        field: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    resolve_scenario(spec, dir, path)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    if !path.exists() {
        return Err(ScenarioError::MissingFile(path.display().to_string()));
    }
    std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Resolves a spec whose relative file paths are taken from `dir`.
pub fn resolve_scenario(spec: ScenarioSpec, dir: &Path, origin: &Path) -> Result<Scenario, ScenarioError> {
    let here = origin.display().to_string();
    let field_err =
        |field: &str, message: String| ScenarioError::Parse { path: here.clone(), field: field.to_string(), message };
    if !(spec.threshold_mm.is_finite() && spec.threshold_mm >= 0.0) {
        return Err(field_err("threshold_mm", format!("must be finite and >= 0, got {}", spec.threshold_mm)));
    }
    spec.sampler.validate().map_err(|m| field_err("sampler", m))?;

    let robot_path = dir.join(&spec.robot);
    let env_path = dir.join(&spec.environment);
    let object_path = dir.join(&spec.object);
    for p in [&robot_path, &env_path, &object_path] {
        if !p.exists() {
            return Err(ScenarioError::MissingFile(p.display().to_string()));
        }
    }
    let shown = |p: &Path| p.display().to_string();
    let model = RobotModel::from_file(&robot_path)
        .map_err(|source| ScenarioError::Kinematics { path: shown(&robot_path), source })?;
    let environment =
        Environment::from_file(&env_path).map_err(|source| ScenarioError::Scene { path: shown(&env_path), source })?;
    let object = ObjectModel::from_file(&object_path)
        .map_err(|source| ScenarioError::Scene { path: shown(&object_path), source })?;
    if object.grasps.is_empty() {
        return Err(ScenarioError::Scene {
            path: object_path.display().to_string(),
            source: SceneError::EmptyResult("object file declares no grasps".into()),
        });
    }

    let stance_spec = match &spec.stance {
        StanceChoice::Preset(StancePreset::Custom) => {
            return Err(field_err("stance", "`custom` needs a full stance object".into()))
        }
        StanceChoice::Preset(p) => StanceSpec::preset(*p),
        StanceChoice::Custom(s) => s.clone(),
    };
    let stance = Stance::resolve(&model, &stance_spec).map_err(|e| field_err("stance", e.to_string()))?;
    let polygon = support_polygon(&model, &stance).map_err(|e| field_err("stance", e.to_string()))?;

    let select = |field: &str, sel: &PlacementSelector| -> Result<Placement, ScenarioError> {
        let surface = environment
            .surface(&sel.surface)
            .ok_or_else(|| field_err(&format!("{field}.surface"), format!("unknown surface `{}`", sel.surface)))?;
        let p = placement_at(&object, surface, sel.face, sel.x, sel.y, sel.yaw)
            .map_err(|e| field_err(field, e.to_string()))?;
        if !p.stable {
            return Err(field_err(field, "placement is not statically stable".into()));
        }
        Ok(p)
    };
    let start = Placement { id: 0, ..select("start", &spec.start)? };
    let goal = Placement { id: 1, ..select("goal", &spec.goal)? };

    let mut intermediate = Vec::new();
    for (i, name) in spec.intermediate_surfaces.iter().enumerate() {
        let field = format!("intermediate_surfaces[{i}]");
        let surface =
            environment.surface(name).ok_or_else(|| field_err(&field, format!("unknown surface `{name}`")))?;
        let found = enumerate_placements(&object, surface, &spec.placement_grid)
            .map_err(|e| field_err(&field, e.to_string()))?;
        for p in found {
            intermediate.push(Placement { id: 2 + intermediate.len(), ..p });
        }
    }

    let handover_poses = spec
        .handover_poses
        .iter()
        .enumerate()
        .map(|(i, t)| t.to_transform().map_err(|m| field_err(&format!("handover_poses[{i}]"), m)))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Scenario {
        threshold: spec.threshold_mm,
        spec,
        model,
        environment,
        object,
        stance,
        polygon,
        start,
        goal,
        intermediate,
        handover_poses,
    })
}
