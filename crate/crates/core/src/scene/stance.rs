use super::SceneError;
use crate::kinematics::{solve_link_ik, Hand, IkParams, Posture, RobotModel, Transform};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// A foot corner counts as touching the floor within this height, mm.
pub const CONTACT_HEIGHT_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StancePreset {
    Upright,
    Staggered,
    Crouched,
    OneLegged,
    Custom,
}

impl StancePreset {
    pub const NAMED: [StancePreset; 4] =
        [StancePreset::Upright, StancePreset::Staggered, StancePreset::Crouched, StancePreset::OneLegged];

    pub fn as_str(self) -> &'static str {
        match self {
            StancePreset::Upright => "upright",
            StancePreset::Staggered => "staggered",
            StancePreset::Crouched => "crouched",
            StancePreset::OneLegged => "one_legged",
            StancePreset::Custom => "custom",
        }
    }
}

/// Ground pose of one ankle frame. `lift` > 0 raises the sole off the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootPlacement {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub lift: f64,
}

impl FootPlacement {
    pub fn contact(&self) -> bool {
        self.lift == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StanceSpec {
    pub name: String,
    pub preset: StancePreset,
    /// pelvis frame position above the floor origin, mm
    pub pelvis: [f64; 3],
    pub left: FootPlacement,
    pub right: FootPlacement,
    /// Moves this foot under the home-pose robot CoM before solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub under_com: Option<Hand>,
}

impl StanceSpec {
    pub fn preset(preset: StancePreset) -> StanceSpec {
        let foot = |x: f64, y: f64| FootPlacement { x, y, yaw: 0.0, lift: 0.0 };
        let (pelvis, left, right, under_com) = match preset {
            StancePreset::Upright | StancePreset::Custom => {
                ([0.0, 0.0, 830.0], foot(0.0, 100.0), foot(0.0, -100.0), None)
            }
            StancePreset::Staggered => ([0.0, 0.0, 820.0], foot(-200.0, 100.0), foot(50.0, -100.0), None),
            StancePreset::Crouched => (
                [0.0, 0.0, 640.0],
                FootPlacement { yaw: 0.5, ..foot(60.0, 230.0) },
                FootPlacement { yaw: -0.5, ..foot(60.0, -230.0) },
                None,
            ),
            StancePreset::OneLegged => (
                [0.0, 0.0, 830.0],
                FootPlacement { lift: 50.0, ..foot(0.0, 170.0) },
                foot(0.0, -40.0),
                Some(Hand::Right),
            ),
        };
        StanceSpec { name: preset.as_str().to_string(), preset, pelvis, left, right, under_com }
    }

    pub fn foot(&self, side: Hand) -> &FootPlacement {
        match side {
            Hand::Left => &self.left,
            Hand::Right => &self.right,
        }
    }

    fn foot_mut(&mut self, side: Hand) -> &mut FootPlacement {
        match side {
            Hand::Left => &mut self.left,
            Hand::Right => &mut self.right,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        let finite = self.pelvis.iter().all(|v| v.is_finite())
            && [self.left, self.right].iter().all(|f| [f.x, f.y, f.yaw, f.lift].iter().all(|v| v.is_finite()));
        if !finite {
            return Err(SceneError::Stance(format!("{}: non-finite value", self.name)));
        }
        if self.left.lift < 0.0 || self.right.lift < 0.0 {
            return Err(SceneError::Stance(format!("{}: foot lift must be >= 0", self.name)));
        }
        if !self.left.contact() && !self.right.contact() {
            return Err(SceneError::Stance(format!("{}: no foot touches the ground", self.name)));
        }
        if let Some(side) = self.under_com {
            if !self.foot(side).contact() {
                return Err(SceneError::Stance(format!("{}: under_com foot must be in contact", self.name)));
            }
        }
        Ok(())
    }
}

/// A stance resolved against a robot: fixed leg joint values and foot contacts.
#[derive(Debug, Clone, PartialEq)]
pub struct Stance {
    pub spec: StanceSpec,
    /// Base pose and leg joints for this stance; arms and waist at home.
    pub posture: Posture,
    pub contact: [bool; 2],
}

impl Stance {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Solves the leg joints so each ankle frame reaches its placement.
    pub fn resolve(model: &RobotModel, spec: &StanceSpec) -> Result<Stance, SceneError> {
        spec.validate()?;
        let mut spec = spec.clone();
        let base = Transform::from_translation(spec.pelvis[0], spec.pelvis[1], spec.pelvis[2]);
        let mut posture = model.home_posture(base);
        let rounds = if spec.under_com.is_some() { 30 } else { 1 };
        for _ in 0..rounds {
            for side in [Hand::Left, Hand::Right] {
                solve_leg(model, &spec, side, &mut posture)?;
            }
            let Some(side) = spec.under_com else { break };
            let com = model.robot_com_from_frames(&model.link_frames(&posture));
            let f = spec.foot(side);
            let centre = foot_centre(model, side);
            let offset = Transform::rot_z(f.yaw).apply_vector(&centre);
            let (nx, ny) = (com.x - offset.x, com.y - offset.y);
            let moved = (nx - f.x).hypot(ny - f.y);
            let f = spec.foot_mut(side);
            f.x = nx;
            f.y = ny;
            if moved < 1e-9 {
                break;
            }
        }
        if let Some(side) = spec.under_com {
            solve_leg(model, &spec, side, &mut posture)?;
        }

        let frames = model.link_frames(&posture);
        let mut contact = [false; 2];
        for side in [Hand::Left, Hand::Right] {
            let foot = model.foot(side);
            let heights: Vec<f64> = foot.corners.iter().map(|c| frames[foot.link].apply_point(c).z).collect();
            let touching = heights.iter().all(|z| z.abs() <= CONTACT_HEIGHT_MM);
            if spec.foot(side).contact() != touching {
                return Err(SceneError::Stance(format!(
                    "{}: {side} foot corners at heights {heights:?} do not match the requested contact",
                    spec.name
                )));
            }
            contact[side.index()] = touching;
        }
        Ok(Stance { spec, posture, contact })
    }

    pub fn from_preset(model: &RobotModel, preset: StancePreset) -> Result<Stance, SceneError> {
        Self::resolve(model, &StanceSpec::preset(preset))
    }

    /// World positions of the corners of every contacting foot.
    pub fn contact_corners(&self, model: &RobotModel) -> Vec<Vector3<f64>> {
        let frames = model.link_frames(&self.posture);
        [Hand::Left, Hand::Right]
            .into_iter()
            .filter(|s| self.contact[s.index()])
            .flat_map(|s| {
                let foot = model.foot(s);
                let f = frames[foot.link];
                foot.corners.iter().map(move |c| f.apply_point(c)).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Centre of the sole corners in the ankle frame, projected to the sole plane.
fn foot_centre(model: &RobotModel, side: Hand) -> Vector3<f64> {
    let c = model.foot(side).corners.iter().sum::<Vector3<f64>>() / 4.0;
    Vector3::new(c.x, c.y, 0.0)
}

fn solve_leg(model: &RobotModel, spec: &StanceSpec, side: Hand, posture: &mut Posture) -> Result<(), SceneError> {
    let foot = model.foot(side);
    let sole = foot.corners[0].z;
    if foot.corners.iter().any(|c| (c.z - sole).abs() > 1e-12) {
        return Err(SceneError::Stance(format!("{side} foot corners are not level in the ankle frame")));
    }
    let f = spec.foot(side);
    let target = Transform::rot_z(f.yaw).with_translation(Vector3::new(f.x, f.y, f.lift - sole));
    let params = IkParams {
        max_iterations: 500,
        position_tolerance: 1e-7,
        orientation_tolerance: 1e-9,
        converged_position: 1e-9,
        converged_orientation: 1e-12,
        ..IkParams::default()
    };
    let free = model.leg_joints(side);
    let sol = solve_link_ik(model, foot.link, &target, posture, &free, &params)
        .map_err(|e| SceneError::Stance(format!("{}: {side} foot placement unreachable: {e}", spec.name)))?;
    *posture = sol.posture;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn biped() -> RobotModel {
        RobotModel::from_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/models/biped.json")).unwrap()
    }

    #[test]
    fn presets_resolve_with_flat_soles() {
        let m = biped();
        for p in StancePreset::NAMED {
            let s = Stance::from_preset(&m, p).unwrap_or_else(|e| panic!("{p:?}: {e}"));
            for c in s.contact_corners(&m) {
                assert!(c.z.abs() <= CONTACT_HEIGHT_MM, "{p:?} {c:?}");
            }
        }
    }

    #[test]
    fn one_legged_lifts_left_and_centres_right() {
        let m = biped();
        let s = Stance::from_preset(&m, StancePreset::OneLegged).unwrap();
        assert_eq!(s.contact, [false, true]);
        let frames = m.link_frames(&s.posture);
        let left = m.foot(Hand::Left);
        let z = frames[left.link].apply_point(&left.corners[0]).z;
        assert!((z - 50.0).abs() < 1e-6);
        let com = m.robot_com_from_frames(&frames);
        let corners = s.contact_corners(&m);
        let centre = corners.iter().sum::<Vector3<f64>>() / corners.len() as f64;
        assert!((com.x - centre.x).hypot(com.y - centre.y) < 1e-6);
    }

    #[test]
    fn unreachable_foot_is_an_error() {
        let m = biped();
        let mut spec = StanceSpec::preset(StancePreset::Upright);
        spec.left.x = 900.0;
        assert!(matches!(Stance::resolve(&m, &spec), Err(SceneError::Stance(_))));
        let mut spec = StanceSpec::preset(StancePreset::Upright);
        spec.left.lift = 10.0;
        spec.right.lift = 10.0;
        assert!(matches!(Stance::resolve(&m, &spec), Err(SceneError::Stance(_))));
    }
}
