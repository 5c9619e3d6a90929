//! Rigid-body kinematic tree with link masses: forward kinematics, damped
//! least-squares inverse kinematics, and world-frame link CoMs.

mod ik;
mod model;
mod transform;

pub use ik::{solve_ik, solve_link_ik, IkParams, IkSolution};
pub use model::{FeetSpec, Foot, FootSpec, HandsSpec, Joint, JointSpec, Link, LinkSpec, RobotModel, RobotModelSpec};
pub use transform::{Transform, TransformSpec, ROTATION_TOLERANCE};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Slack (rad) accepted when checking joint limits.
pub const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("joint `{0}` has no value in the configuration")]
    MissingJoint(String),
    #[error("configuration names unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("joint `{joint}` = {value} outside limits [{lower}, {upper}]")]
    JointOutOfLimits { joint: String, value: f64, lower: f64, upper: f64 },
    #[error("IK infeasible after {iterations} iterations (position error {position_error:.3} mm, orientation error {orientation_error:.4} rad)")]
    Infeasible { iterations: usize, position_error: f64, orientation_error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn index(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

impl std::fmt::Display for Hand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A robot posture keyed by joint name.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub base_pose: Transform,
    pub joint_values: BTreeMap<String, f64>,
}

/// Posture in the model's joint order; the form used in inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Posture {
    pub base: Transform,
    pub joints: Vec<f64>,
}

impl RobotModel {
    pub fn home_posture(&self, base: Transform) -> Posture {
        Posture { base, joints: self.home().to_vec() }
    }

    pub fn to_configuration(&self, p: &Posture) -> Configuration {
        Configuration {
            base_pose: p.base,
            joint_values: p.joints.iter().enumerate().map(|(j, &v)| (self.joint_name(j).to_string(), v)).collect(),
        }
    }

    /// Converts a named configuration, checking coverage and limits.
    pub fn to_posture(&self, q: &Configuration) -> Result<Posture, KinematicsError> {
        for name in q.joint_values.keys() {
            if self.joint_index(name).is_none() {
                return Err(KinematicsError::UnknownJoint(name.clone()));
            }
        }
        let mut joints = vec![0.0; self.dof()];
        for (j, slot) in joints.iter_mut().enumerate() {
            let name = self.joint_name(j);
            *slot = *q.joint_values.get(name).ok_or_else(|| KinematicsError::MissingJoint(name.to_string()))?;
        }
        let p = Posture { base: q.base_pose, joints };
        self.check_limits(&p)?;
        Ok(p)
    }

    pub fn check_limits(&self, p: &Posture) -> Result<(), KinematicsError> {
        for (j, &v) in p.joints.iter().enumerate() {
            let (lower, upper) = self.joint_limits(j);
            if !v.is_finite() || v < lower - LIMIT_SLACK || v > upper + LIMIT_SLACK {
                return Err(KinematicsError::JointOutOfLimits {
                    joint: self.joint_name(j).to_string(),
                    value: v,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    pub fn clamp_to_limits(&self, joints: &mut [f64]) {
        for (j, v) in joints.iter_mut().enumerate() {
            let (lo, hi) = self.joint_limits(j);
            *v = v.clamp(lo, hi);
        }
    }

    /// World frame of every link, indexed like [`RobotModel::links`]. No limit check.
    pub fn link_frames(&self, p: &Posture) -> Vec<Transform> {
        let mut frames: Vec<Transform> = Vec::with_capacity(self.links().len());
        for link in self.links() {
            let parent = match link.parent {
                Some(i) => frames[i],
                None => p.base,
            };
            let mut frame = parent.compose(&link.origin);
            if let (Joint::Revolute { axis, .. }, Some(j)) = (&link.joint, link.joint_index) {
                frame = frame.compose(&Transform::from_axis_angle(axis, p.joints[j]));
            }
            frames.push(frame);
        }
        frames
    }

    /// (mass, world CoM) per link from precomputed frames.
    pub fn coms_from_frames(&self, frames: &[Transform]) -> Vec<(f64, Vector3<f64>)> {
        self.links().iter().zip(frames).map(|(l, f)| (l.mass, f.apply_point(&l.local_com))).collect()
    }

    /// Mass-weighted mean of the link CoMs.
    pub fn robot_com_from_frames(&self, frames: &[Transform]) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (l, f) in self.links().iter().zip(frames) {
            acc += f.apply_point(&l.local_com) * l.mass;
        }
        acc / self.total_mass()
    }
}

/// World transform of every link.
pub fn forward_kinematics(
    model: &RobotModel,
    q: &Configuration,
) -> Result<BTreeMap<String, Transform>, KinematicsError> {
    let p = model.to_posture(q)?;
    let frames = model.link_frames(&p);
    Ok(model.links().iter().zip(frames).map(|(l, f)| (l.name.clone(), f)).collect())
}

/// (mass kg, world CoM mm) for every link, in model link order.
pub fn link_coms_world(model: &RobotModel, q: &Configuration) -> Result<Vec<(f64, Vector3<f64>)>, KinematicsError> {
    let p = model.to_posture(q)?;
    Ok(model.coms_from_frames(&model.link_frames(&p)))
}

#[cfg(test)]
pub(crate) mod test_models {
    /// One revolute link about z, child offset (100, 0, 0).
    pub const TWO_LINK: &str = r#"{
      "name": "two_link",
      "links": [
        {"name": "base", "joint": {"type": "fixed"}, "mass": 10.0, "com": [0, 0, 100]},
        {"name": "j1", "parent": "base", "joint": {"type": "revolute", "axis": [0, 0, 1], "limits": [-3.2, 3.2]}, "mass": 2.0, "com": [50, 0, 0]},
        {"name": "tip", "parent": "j1", "joint": {"type": "fixed"}, "origin": {"translation": [100, 0, 0]}, "mass": 0.0}
      ],
      "hands": {"left": "tip", "right": "tip"},
      "feet": {
        "left": {"link": "base", "corners": [[-50,-50,0],[50,-50,0],[50,50,0],[-50,50,0]]},
        "right": {"link": "base", "corners": [[-50,-50,0],[50,-50,0],[50,50,0],[-50,50,0]]}
      }
    }"#;
}

#[cfg(test)]
mod tests {
    use super::test_models::TWO_LINK;
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cfg(v: f64) -> Configuration {
        Configuration { base_pose: Transform::identity(), joint_values: [("j1".to_string(), v)].into_iter().collect() }
    }

    #[test]
    fn rest_pose_chains_origins() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let fk = forward_kinematics(&m, &cfg(0.0)).unwrap();
        assert_eq!(fk["tip"].translation, Vector3::new(100.0, 0.0, 0.0));
        assert_eq!(fk["base"], Transform::identity());
    }

    #[test]
    fn quarter_turn_moves_child() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let fk = forward_kinematics(&m, &cfg(FRAC_PI_2)).unwrap();
        assert!((fk["tip"].translation - Vector3::new(0.0, 100.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn link_coms_and_mass_conservation() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let coms = link_coms_world(&m, &cfg(0.0)).unwrap();
        assert_eq!(coms[0], (10.0, Vector3::new(0.0, 0.0, 100.0)));
        let total: f64 = coms.iter().map(|c| c.0).sum();
        assert_eq!(total, m.total_mass());
        // half-turn negates the x-offset of the rotating link's CoM
        let rotated = link_coms_world(&m, &cfg(PI)).unwrap();
        assert!((rotated[1].1.x + 50.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_limit_joint_is_named() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        match forward_kinematics(&m, &cfg(4.0)) {
            Err(KinematicsError::JointOutOfLimits { joint, .. }) => assert_eq!(joint, "j1"),
            other => panic!("unexpected {other:?}"),
        }
        let empty = Configuration { base_pose: Transform::identity(), joint_values: BTreeMap::new() };
        assert_eq!(forward_kinematics(&m, &empty), Err(KinematicsError::MissingJoint("j1".into())));
    }

    #[test]
    fn model_validation_errors_name_fields() {
        let bad_mass = TWO_LINK.replace("\"mass\": 2.0", "\"mass\": -2.0");
        let err = RobotModel::from_json_str(&bad_mass).unwrap_err().to_string();
        assert!(err.contains("mass"), "{err}");
        let bad_axis = TWO_LINK.replace("[0, 0, 1]", "[0, 0, 2]");
        assert!(RobotModel::from_json_str(&bad_axis).unwrap_err().to_string().contains("axis"));
        let bad_hand = TWO_LINK.replace("\"left\": \"tip\"", "\"left\": \"nope\"");
        assert!(RobotModel::from_json_str(&bad_hand).unwrap_err().to_string().contains("hands.left"));
    }
}
