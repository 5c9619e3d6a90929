//! Composite robot-object centre of mass, the support polygon of a stance
//! and the threshold verdict every planner and estimator state must pass.

use crate::geometry::{convex_hull, ConvexPolygon, GeometryError, Point2};
use crate::kinematics::{Configuration, Hand, IkParams, KinematicsError, Posture, RobotModel, Transform};
use crate::scene::{ObjectModel, Stance};
use nalgebra::Vector3;
use thiserror::Error;

/// Pose agreement (mm) demanded between a held object and the hand defining it.
pub const ATTACHMENT_TOLERANCE_MM: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("object pose disagrees with the {hand} hand by {position:.3} mm / {orientation:.4} rad")]
    Inconsistent { hand: Hand, position: f64, orientation: f64 },
    #[error("threshold must be finite and >= 0, got {0}")]
    BadThreshold(f64),
}

/// How the object is held. Grasp transforms give the object pose in the hand frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attachment {
    None,
    InHand { hand: Hand, grasp: Transform },
    BothHands { left: Transform, right: Transform },
}

impl Attachment {
    pub fn hands(&self) -> Vec<Hand> {
        match self {
            Attachment::None => vec![],
            Attachment::InHand { hand, .. } => vec![*hand],
            Attachment::BothHands { .. } => vec![Hand::Left, Hand::Right],
        }
    }

    pub fn is_held(&self) -> bool {
        !matches!(self, Attachment::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub q: Configuration,
    pub attachment: Attachment,
    pub object_pose: Transform,
}

impl SystemState {
    /// A state whose object pose follows from the holding hand (left, for both hands).
    pub fn attached(model: &RobotModel, q: Configuration, attachment: Attachment) -> Result<Self, KinematicsError> {
        let frames = model.link_frames(&model.to_posture(&q)?);
        let object_pose = match attachment {
            Attachment::None => Transform::identity(),
            Attachment::InHand { hand, grasp } => frames[model.hand_link(hand)].compose(&grasp),
            Attachment::BothHands { left, .. } => frames[model.hand_link(Hand::Left)].compose(&left),
        };
        Ok(Self { q, attachment, object_pose })
    }

    /// Checks the attachment invariant against FK. The second hand of a
    /// two-handed hold only needs to agree within the IK tolerance.
    pub fn check_consistency(&self, model: &RobotModel, frames: &[Transform]) -> Result<(), StabilityError> {
        let ik = IkParams::default();
        let mut holds = Vec::new();
        match self.attachment {
            Attachment::None => {}
            Attachment::InHand { hand, grasp } => holds.push((hand, grasp, ATTACHMENT_TOLERANCE_MM, 1e-9)),
            Attachment::BothHands { left, right } => {
                holds.push((Hand::Left, left, ATTACHMENT_TOLERANCE_MM, 1e-9));
                holds.push((Hand::Right, right, ik.position_tolerance, ik.orientation_tolerance));
            }
        }
        for (hand, grasp, pos_tol, rot_tol) in holds {
            let implied = frames[model.hand_link(hand)].compose(&grasp);
            let position = implied.position_error_to(&self.object_pose).norm();
            let orientation = implied.orientation_error_to(&self.object_pose).norm();
            if position > pos_tol || orientation > rot_tol {
                return Err(StabilityError::Inconsistent { hand, position, orientation });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub com_world: Vector3<f64>,
    pub projection: Point2,
    pub margin: f64,
    pub stable: bool,
    pub threshold: f64,
}

impl StabilityVerdict {
    /// Vertical drop of `com` onto the floor, judged against `polygon` at `threshold`.
    pub fn evaluate(com: Vector3<f64>, polygon: &ConvexPolygon, threshold: f64) -> Self {
        let projection = Point2 { x: com.x, y: com.y };
        let margin = polygon.signed_margin(projection);
        let stable = polygon.contains(projection) && margin >= threshold;
        Self { com_world: com, projection, margin, stable, threshold }
    }
}

/// Mass-weighted CoM of the robot plus an optional held object.
pub fn composite_com(
    model: &RobotModel,
    q: &Configuration,
    object: Option<&ObjectModel>,
    object_pose: &Transform,
) -> Result<Vector3<f64>, KinematicsError> {
    let frames = model.link_frames(&model.to_posture(q)?);
    Ok(composite_com_from_frames(model, &frames, object.map(|o| (o, object_pose))))
}

pub fn composite_com_from_frames(
    model: &RobotModel,
    frames: &[Transform],
    object: Option<(&ObjectModel, &Transform)>,
) -> Vector3<f64> {
    let robot = model.robot_com_from_frames(frames);
    match object {
        Some((o, pose)) if o.mass > 0.0 => {
            let big_m = model.total_mass();
            (robot * big_m + o.world_com(pose) * o.mass) / (big_m + o.mass)
        }
        _ => robot,
    }
}

/// Convex hull of the floor-projected corners of the contacting feet.
pub fn support_polygon(model: &RobotModel, stance: &Stance) -> Result<ConvexPolygon, GeometryError> {
    let pts: Vec<Point2> =
        stance.contact_corners(model).iter().map(|c| Point2::new(c.x, c.y)).collect::<Result<_, _>>()?;
    convex_hull(&pts)
}

pub fn check_state(
    state: &SystemState,
    model: &RobotModel,
    object: Option<&ObjectModel>,
    polygon: &ConvexPolygon,
    threshold: f64,
) -> Result<StabilityVerdict, StabilityError> {
    let posture = model.to_posture(&state.q)?;
    check_posture(&posture, state, model, object, polygon, threshold)
}

/// [`check_state`] on an already validated posture.
pub fn check_posture(
    posture: &Posture,
    state: &SystemState,
    model: &RobotModel,
    object: Option<&ObjectModel>,
    polygon: &ConvexPolygon,
    threshold: f64,
) -> Result<StabilityVerdict, StabilityError> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(StabilityError::BadThreshold(threshold));
    }
    let frames = model.link_frames(posture);
    state.check_consistency(model, &frames)?;
    let held = object.filter(|_| state.attachment.is_held()).map(|o| (o, &state.object_pose));
    let com = composite_com_from_frames(model, &frames, held);
    Ok(StabilityVerdict::evaluate(com, polygon, threshold))
}
