use super::{Configuration, Hand, Joint, KinematicsError, Posture, RobotModel, Transform};
use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

/// Position rows are solved in metres so that the damping acts on
/// comparable scales for position and orientation.
const POSITION_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    /// rad per iteration, applied to the largest joint delta
    pub max_step: f64,
    pub max_iterations: usize,
    /// success tolerance, mm
    pub position_tolerance: f64,
    /// success tolerance, rad
    pub orientation_tolerance: f64,
    /// early-exit thresholds, well inside the success tolerances
    pub converged_position: f64,
    pub converged_orientation: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_step: 0.2,
            max_iterations: 300,
            position_tolerance: 1.0,
            orientation_tolerance: 0.01,
            converged_position: 1e-4,
            converged_orientation: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub posture: Posture,
    pub position_error: f64,
    pub orientation_error: f64,
    pub iterations: usize,
}

/// Solves for `hand` reaching `target`, moving only that arm's chain (waist included).
pub fn solve_ik(
    model: &RobotModel,
    hand: Hand,
    target: &Transform,
    seed: &Configuration,
) -> Result<Configuration, KinematicsError> {
    let seed = model.to_posture(seed)?;
    let free = model.arm_joints(hand);
    let sol = solve_link_ik(model, model.hand_link(hand), target, &seed, &free, &IkParams::default())?;
    Ok(model.to_configuration(&sol.posture))
}

/// Damped least-squares on the 6D pose error of `link`, moving only the
/// joints in `free`. Steps are capped and clamped to joint limits, so the
/// result never violates a limit. The final pose is re-checked by FK.
pub fn solve_link_ik(
    model: &RobotModel,
    link: usize,
    target: &Transform,
    seed: &Posture,
    free: &[usize],
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    let mut posture = seed.clone();
    model.clamp_to_limits(&mut posture.joints);
    let n = free.len();
    let lambda2 = params.damping * params.damping;

    let mut iterations = 0;
    loop {
        let frames = model.link_frames(&posture);
        let current = frames[link];
        let pos_err = current.position_error_to(target);
        let rot_err = current.orientation_error_to(target);
        if pos_err.norm() <= params.converged_position && rot_err.norm() <= params.converged_orientation {
            break;
        }
        if iterations >= params.max_iterations || n == 0 {
            break;
        }
        iterations += 1;

        let mut jac = DMatrix::<f64>::zeros(6, n);
        for (col, &j) in free.iter().enumerate() {
            let li = model.joint_link(j);
            if !model.chain_contains(link, li) {
                continue;
            }
            let axis = match &model.link(li).joint {
                Joint::Revolute { axis, .. } => frames[li].rotation * axis.into_inner(),
                Joint::Fixed => continue,
            };
            let lin = axis.cross(&(current.translation - frames[li].translation)) * POSITION_SCALE;
            jac.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, col).copy_from(&axis);
        }
        let err = Vector6::new(
            pos_err.x * POSITION_SCALE,
            pos_err.y * POSITION_SCALE,
            pos_err.z * POSITION_SCALE,
            rot_err.x,
            rot_err.y,
            rot_err.z,
        );
        let jjt: Matrix6<f64> =
            (&jac * jac.transpose()).fixed_view::<6, 6>(0, 0).into_owned() + Matrix6::identity() * lambda2;
        let y = match jjt.cholesky() {
            Some(ch) => ch.solve(&err),
            None => break,
        };
        let mut dq: DVector<f64> = jac.transpose() * DVector::from_column_slice(y.as_slice());
        let biggest = dq.amax();
        if biggest > params.max_step {
            dq *= params.max_step / biggest;
        }
        for (col, &j) in free.iter().enumerate() {
            let (lo, hi) = model.joint_limits(j);
            posture.joints[j] = (posture.joints[j] + dq[col]).clamp(lo, hi);
        }
    }

    // Independent re-check of the returned posture.
    let frames = model.link_frames(&posture);
    let position_error = frames[link].position_error_to(target).norm();
    let orientation_error = frames[link].orientation_error_to(target).norm();
    model.check_limits(&posture)?;
    if position_error <= params.position_tolerance && orientation_error <= params.orientation_tolerance {
        Ok(IkSolution { posture, position_error, orientation_error, iterations })
    } else {
        Err(KinematicsError::Infeasible { iterations, position_error, orientation_error })
    }
}

impl RobotModel {
    /// True when `ancestor` lies on the root path of `link` (inclusive).
    pub fn chain_contains(&self, link: usize, ancestor: usize) -> bool {
        let mut cur = Some(link);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.link(c).parent;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use crate::kinematics::test_models::TWO_LINK;

    #[test]
    fn already_solved_target() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let seed = m.to_configuration(&Posture { base: Transform::identity(), joints: vec![0.7] });
        let target = forward_kinematics(&m, &seed).unwrap()["tip"];
        let sol = solve_ik(&m, Hand::Left, &target, &seed).unwrap();
        let reached = forward_kinematics(&m, &sol).unwrap()["tip"];
        assert!((reached.translation - target.translation).norm() < 1e-6);
    }

    #[test]
    fn planar_rotation_is_solved() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let seed = m.to_configuration(&Posture { base: Transform::identity(), joints: vec![0.0] });
        let goal = m.to_configuration(&Posture { base: Transform::identity(), joints: vec![2.5] });
        let target = forward_kinematics(&m, &goal).unwrap()["tip"];
        let sol = solve_ik(&m, Hand::Left, &target, &seed).unwrap();
        assert!((sol.joint_values["j1"] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn out_of_reach_is_infeasible() {
        let m = RobotModel::from_json_str(TWO_LINK).unwrap();
        let seed = m.to_configuration(&Posture { base: Transform::identity(), joints: vec![0.0] });
        let target = Transform::from_translation(300.0, 0.0, 0.0);
        assert!(matches!(solve_ik(&m, Hand::Left, &target, &seed), Err(KinematicsError::Infeasible { .. })));
    }
}
