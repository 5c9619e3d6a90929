use super::{Plan, MAX_WAYPOINT_STEP};
use crate::kinematics::{IkParams, Posture};
use crate::scenario::Scenario;
use crate::scene::first_collision;
use crate::stability::check_posture;

/// Agreement demanded between a recorded and a recomputed margin, mm.
const MARGIN_AGREEMENT: f64 = 1e-6;
/// Distance allowed between a plan end and its placement, mm.
const ENDPOINT_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StepCheck {
    pub index: usize,
    /// recomputed margin, mm
    pub margin: f64,
    pub stable: bool,
    pub problem: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub steps: Vec<StepCheck>,
    pub min_margin: f64,
    pub valid: bool,
    pub first_invalid: Option<usize>,
}

/// Re-checks every plan state from its stored configuration alone: limits,
/// fixed legs, IK targets, waypoint spacing, collision, attachment, stability
/// at `tau`, agreement with the recorded verdict, and the start and goal poses.
pub fn validate_plan(plan: &Plan, scenario: &Scenario, tau: f64) -> PlanReport {
    let model = &scenario.model;
    let stance = &scenario.stance.posture;
    let env = scenario.environment.primitives();
    let ik = IkParams::default();
    let placements = scenario.placements();
    let mut previous: Option<Posture> = None;
    let mut steps = Vec::with_capacity(plan.steps.len());

    for (index, step) in plan.steps.iter().enumerate() {
        let mut problems: Vec<String> = Vec::new();
        let posture = match model.to_posture(&step.state.q) {
            Ok(p) => p,
            Err(e) => {
                steps.push(StepCheck { index, margin: f64::NAN, stable: false, problem: Some(e.to_string()) });
                previous = None;
                continue;
            }
        };
        if posture.base != stance.base
            || [crate::kinematics::Hand::Left, crate::kinematics::Hand::Right]
                .iter()
                .flat_map(|&s| model.leg_joints(s))
                .any(|j| posture.joints[j] != stance.joints[j])
        {
            problems.push("stance changed".into());
        }
        if let Some(prev) = &previous {
            let d = prev.joints.iter().zip(&posture.joints).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d > MAX_WAYPOINT_STEP + 1e-9 {
                problems.push(format!("joint jump of {d:.4} rad from the previous step"));
            }
        }
        let frames = model.link_frames(&posture);
        for (hand, target) in &step.targets {
            let f = frames[model.hand_link(*hand)];
            let pe = f.position_error_to(target).norm();
            let oe = f.orientation_error_to(target).norm();
            if pe > ik.position_tolerance || oe > ik.orientation_tolerance {
                problems.push(format!("ik: {hand} hand off target by {pe:.3} mm / {oe:.4} rad"));
            }
        }
        let obj = Some((&scenario.object, &step.state.object_pose));
        if let Some(c) = first_collision(model, &frames, obj, &step.touching, &env) {
            problems.push(format!("collision: {c}"));
        }
        let (margin, stable) =
            match check_posture(&posture, &step.state, model, Some(&scenario.object), &scenario.polygon, tau) {
                Ok(v) => {
                    if !v.stable {
                        problems.push(format!("unstable: margin {:.3} mm below {tau} mm", v.margin));
                    }
                    if step.verdict.margin < tau || (step.verdict.margin - v.margin).abs() > MARGIN_AGREEMENT {
                        problems.push(format!(
                            "recorded margin {:.3} mm disagrees with {:.3} mm at threshold {tau} mm",
                            step.verdict.margin, v.margin
                        ));
                    }
                    (v.margin, v.stable)
                }
                Err(e) => {
                    problems.push(e.to_string());
                    (f64::NAN, false)
                }
            };
        let ends = [(0, plan.start_placement), (plan.steps.len() - 1, plan.goal_placement)];
        for (at, p) in ends {
            if index == at {
                let err = step.state.object_pose.position_error_to(&placements[p].pose).norm();
                if err > ENDPOINT_TOLERANCE {
                    problems.push(format!("object {err:.3} mm from placement {p}"));
                }
            }
        }
        steps.push(StepCheck {
            index,
            margin,
            stable,
            problem: if problems.is_empty() { None } else { Some(problems.join("; ")) },
        });
        previous = Some(posture);
    }

    let first_invalid = steps.iter().find(|s| s.problem.is_some()).map(|s| s.index);
    let min_margin = steps.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    PlanReport { valid: first_invalid.is_none() && !steps.is_empty(), steps, min_margin, first_invalid }
}
