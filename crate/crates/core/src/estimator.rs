//! Task stability estimation: an energy-biased random tree grown from the
//! task's start state toward its goal state, tallying stable and unstable
//! explored poses per hand configuration.

use crate::geometry::ConvexPolygon;
use crate::kinematics::{solve_link_ik, Hand, IkParams, Posture, Transform};
use crate::scenario::Scenario;
use crate::scene::Grasp;
use crate::stability::{composite_com_from_frames, StabilityVerdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Weight of joint-space distance to the goal in the cost, mm of margin per radian.
pub const DISTANCE_WEIGHT: f64 = 0.01 * 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{hc}: no IK-feasible grasp state at the {which} placement")]
    InfeasibleEndpoints { hc: HandConfiguration, which: &'static str },
    #[error("stability ratio undefined for C + U = 0")]
    UndefinedRatio,
    #[error("no hand configuration has a tally")]
    NoCandidates,
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("{hc}: sampler stalled after {attempts} attempts with {evaluated} poses evaluated")]
    Stalled { hc: HandConfiguration, attempts: usize, evaluated: usize },
}

/// Start hand and end hand; mixed pairs imply a handover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HandConfiguration {
    LL,
    RR,
    LR,
    RL,
}

impl HandConfiguration {
    /// Also the tie-break order for selection.
    pub const ALL: [HandConfiguration; 4] =
        [HandConfiguration::LL, HandConfiguration::RR, HandConfiguration::LR, HandConfiguration::RL];

    pub fn start_hand(self) -> Hand {
        match self {
            HandConfiguration::LL | HandConfiguration::LR => Hand::Left,
            HandConfiguration::RR | HandConfiguration::RL => Hand::Right,
        }
    }

    pub fn end_hand(self) -> Hand {
        match self {
            HandConfiguration::LL | HandConfiguration::RL => Hand::Left,
            HandConfiguration::RR | HandConfiguration::LR => Hand::Right,
        }
    }

    pub fn is_handover(self) -> bool {
        self.start_hand() != self.end_hand()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandConfiguration::LL => "LL",
            HandConfiguration::RR => "RR",
            HandConfiguration::LR => "LR",
            HandConfiguration::RL => "RL",
        }
    }
}

impl std::fmt::Display for HandConfiguration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HandConfiguration {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        HandConfiguration::ALL
            .into_iter()
            .find(|h| h.as_str() == s)
            .ok_or_else(|| format!("unknown hand configuration `{s}`"))
    }
}

/// A scenario's hand configuration: fixed, chosen by estimation, or unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HandChoice {
    Fixed(HandConfiguration),
    #[default]
    Auto,
    Any,
}

impl TryFrom<String> for HandChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "auto" => Ok(HandChoice::Auto),
            "any" => Ok(HandChoice::Any),
            other => other
                .parse()
                .map(HandChoice::Fixed)
                .map_err(|_| format!("unknown hand configuration `{other}` (expected LL, RR, LR, RL, auto or any)")),
        }
    }
}

impl From<HandChoice> for String {
    fn from(c: HandChoice) -> String {
        match c {
            HandChoice::Fixed(h) => h.as_str().to_string(),
            HandChoice::Auto => "auto".into(),
            HandChoice::Any => "any".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerParams {
    /// poses evaluated per hand configuration
    pub samples: usize,
    /// cost units (mm of margin)
    pub temperature: f64,
    pub goal_bias: f64,
    /// rad
    pub step: f64,
    pub seed: u64,
    /// independent chains, seeded `seed`, `seed + 1`, ...
    pub chains: usize,
    /// Half-width (rad) added around the start/goal joint box to form the
    /// sampling region; `None` samples the full joint ranges.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_margin: Option<f64>,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            samples: 10_000,
            temperature: 10.0,
            goal_bias: 0.1,
            step: 0.15,
            seed: 0,
            chains: 1,
            task_margin: Some(0.3),
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("samples must be >= 1".into());
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err("temperature must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err("goal_bias must lie in [0, 1]".into());
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err("step must be > 0".into());
        }
        if self.chains == 0 || self.chains > self.samples {
            return Err("chains must lie in [1, samples]".into());
        }
        if let Some(m) = self.task_margin {
            if !(m.is_finite() && m >= 0.0) {
                return Err("task_margin must be >= 0".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityTally {
    #[serde(rename = "C")]
    pub stable: u64,
    #[serde(rename = "U")]
    pub unstable: u64,
    #[serde(rename = "R")]
    pub ratio: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub samples: usize,
}

impl StabilityTally {
    pub fn new(stable: u64, unstable: u64, seed: u64, samples: usize) -> Result<Self, EstimatorError> {
        Ok(Self { stable, unstable, ratio: stability_ratio(stable, unstable)?, seed, samples })
    }
}

/// C / (C + U).
pub fn stability_ratio(stable: u64, unstable: u64) -> Result<f64, EstimatorError> {
    let total = stable + unstable;
    if total == 0 {
        return Err(EstimatorError::UndefinedRatio);
    }
    Ok(stable as f64 / total as f64)
}

/// Always accepts a non-increasing cost; otherwise accepts with probability exp(-Δ/T).
pub fn transition_test<R: Rng + ?Sized>(cost_old: f64, cost_new: f64, temperature: f64, rng: &mut R) -> bool {
    if cost_new <= cost_old {
        return true;
    }
    let p = (-(cost_new - cost_old) / temperature).exp();
    rng.random::<f64>() < p
}

/// Highest ratio wins; exact ties go to the earlier of LL, RR, LR, RL.
pub fn select_hand_configuration(
    tallies: &BTreeMap<HandConfiguration, StabilityTally>,
) -> Result<HandConfiguration, EstimatorError> {
    let mut best: Option<(HandConfiguration, f64)> = None;
    for hc in HandConfiguration::ALL {
        if let Some(t) = tallies.get(&hc) {
            if best.is_none_or(|(_, r)| t.ratio > r) {
                best = Some((hc, t.ratio));
            }
        }
    }
    best.map(|(hc, _)| hc).ok_or(EstimatorError::NoCandidates)
}

/// Start and goal postures of a task for one hand configuration.
#[derive(Debug, Clone)]
pub struct TaskEndpoints {
    pub start: Posture,
    pub goal: Posture,
    pub start_grasp: Grasp,
    pub goal_grasp: Grasp,
    /// joints the sampler moves: waist plus the arms in use, ascending
    pub free: Vec<usize>,
}

/// Reaches `grasp` on an object at `object_pose` from the stance posture.
pub fn reach_grasp(scenario: &Scenario, grasp: &Grasp, object_pose: &Transform, free: &[usize]) -> Option<Posture> {
    let model = &scenario.model;
    let target = grasp.hand_target(object_pose);
    let link = model.hand_link(grasp.hand);
    let params = IkParams::default();
    ik_seeds(scenario, grasp.hand)
        .iter()
        .find_map(|seed| solve_link_ik(model, link, &target, seed, free, &params).ok())
        .map(|s| s.posture)
}

/// The stance posture, then the same with the arm pulled toward mid-range.
pub fn ik_seeds(scenario: &Scenario, hand: Hand) -> Vec<Posture> {
    let model = &scenario.model;
    let base = scenario.stance.posture.clone();
    let arm: Vec<usize> = model.arm_joints(hand).into_iter().filter(|j| !model.waist_joints().contains(j)).collect();
    let mut seeds = vec![base.clone()];
    for w in [0.5, 1.0] {
        let mut s = base.clone();
        for &j in &arm {
            let (lo, hi) = model.joint_limits(j);
            s.joints[j] += w * ((lo + hi) / 2.0 - s.joints[j]);
        }
        seeds.push(s);
    }
    seeds
}

/// Chooses the first IK-feasible grasps, preferring one grasp that serves both
/// ends when the same hand starts and ends the task.
pub fn task_endpoints(scenario: &Scenario, hc: HandConfiguration) -> Result<TaskEndpoints, EstimatorError> {
    let model = &scenario.model;
    let start_pose = scenario.start.pose;
    let goal_pose = scenario.goal.pose;
    let arm = |h: Hand| model.arm_joints(h);
    let mut free = arm(hc.start_hand());
    free.extend(arm(hc.end_hand()));
    free.sort_unstable();
    free.dedup();

    let solve = |hand: Hand, pose: &Transform| -> Vec<(Grasp, Posture)> {
        scenario
            .object
            .grasps_for(hand)
            .filter(|g| approach_allowed(g, pose))
            .filter_map(|g| reach_grasp(scenario, g, pose, &arm(hand)).map(|p| (g.clone(), p)))
            .collect()
    };
    let starts = solve(hc.start_hand(), &start_pose);
    let goals = solve(hc.end_hand(), &goal_pose);
    if starts.is_empty() {
        return Err(EstimatorError::InfeasibleEndpoints { hc, which: "start" });
    }
    if goals.is_empty() {
        return Err(EstimatorError::InfeasibleEndpoints { hc, which: "goal" });
    }
    let shared = if hc.is_handover() {
        None
    } else {
        starts.iter().find_map(|(g, p)| goals.iter().find(|(h, _)| h.id == g.id).map(|(h, q)| ((g, p), (h, q))))
    };
    let ((sg, sp), (gg, gp)) = shared.unwrap_or(((&starts[0].0, &starts[0].1), (&goals[0].0, &goals[0].1)));
    Ok(TaskEndpoints { start: sp.clone(), goal: gp.clone(), start_grasp: sg.clone(), goal_grasp: gg.clone(), free })
}

/// A grasp may not approach a resting object from below.
pub fn approach_allowed(grasp: &Grasp, object_pose: &Transform) -> bool {
    object_pose.apply_vector(&grasp.approach).z <= 1e-9
}

/// One explored pose: the free joint values and its verdict at the run's threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploredPose {
    pub joints: Vec<f64>,
    pub holder: Hand,
    pub verdict: StabilityVerdict,
}

/// Every pose added to the tree, in insertion order, over all chains.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub hc: HandConfiguration,
    pub params: SamplerParams,
    pub poses: Vec<ExploredPose>,
}

impl Exploration {
    pub fn tally(&self) -> Result<StabilityTally, EstimatorError> {
        let c = self.poses.iter().filter(|p| p.verdict.stable).count() as u64;
        StabilityTally::new(c, self.poses.len() as u64 - c, self.params.seed, self.params.samples)
    }

    /// Re-classifies the frozen poses at another threshold.
    pub fn reclassify(&self, polygon: &ConvexPolygon, threshold: f64) -> (u64, u64) {
        let c = self
            .poses
            .iter()
            .filter(|p| polygon.contains(p.verdict.projection) && p.verdict.margin >= threshold)
            .count() as u64;
        (c, self.poses.len() as u64 - c)
    }
}

pub fn estimate_task_stability(
    scenario: &Scenario,
    hc: HandConfiguration,
    params: &SamplerParams,
) -> Result<StabilityTally, EstimatorError> {
    explore(scenario, hc, params)?.tally()
}

/// Grows the tree(s) and records every evaluated pose.
pub fn explore(
    scenario: &Scenario,
    hc: HandConfiguration,
    params: &SamplerParams,
) -> Result<Exploration, EstimatorError> {
    params.validate().map_err(EstimatorError::InvalidParams)?;
    let ends = task_endpoints(scenario, hc)?;
    let chains = params.chains;
    let budgets: Vec<usize> =
        (0..chains).map(|k| params.samples / chains + usize::from(k < params.samples % chains)).collect();
    let results: Vec<Result<Vec<ExploredPose>, EstimatorError>> = std::thread::scope(|s| {
        let handles: Vec<_> = budgets
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let ends = &ends;
                s.spawn(move || run_chain(scenario, hc, params, ends, params.seed.wrapping_add(k as u64), n))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler chain panicked")).collect()
    });
    let mut poses = Vec::with_capacity(params.samples);
    for r in results {
        poses.extend(r?);
    }
    Ok(Exploration { hc, params: params.clone(), poses })
}

fn run_chain(
    scenario: &Scenario,
    hc: HandConfiguration,
    params: &SamplerParams,
    ends: &TaskEndpoints,
    seed: u64,
    budget: usize,
) -> Result<Vec<ExploredPose>, EstimatorError> {
    let model = &scenario.model;
    let tau = scenario.threshold;
    let free = &ends.free;
    let pick = |p: &Posture| free.iter().map(|&j| p.joints[j]).collect::<Vec<f64>>();
    let start = pick(&ends.start);
    let goal = pick(&ends.goal);
    let bounds: Vec<(f64, f64)> = free
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let (lo, hi) = model.joint_limits(j);
            match params.task_margin {
                Some(m) => ((start[i].min(goal[i]) - m).max(lo), (start[i].max(goal[i]) + m).min(hi)),
                None => (lo, hi),
            }
        })
        .collect();

    let mut posture = ends.start.clone();
    let mut evaluate = |x: &[f64]| -> (Hand, StabilityVerdict, f64) {
        for (&j, &v) in free.iter().zip(x) {
            posture.joints[j] = v;
        }
        let (holder, grasp) = if hc.is_handover() && distance(x, &goal) < distance(x, &start) {
            (hc.end_hand(), &ends.goal_grasp)
        } else {
            (hc.start_hand(), &ends.start_grasp)
        };
        let frames = model.link_frames(&posture);
        let object_pose = frames[model.hand_link(holder)].compose(&grasp.transform);
        let com = composite_com_from_frames(model, &frames, Some((&scenario.object, &object_pose)));
        let verdict = StabilityVerdict::evaluate(com, &scenario.polygon, tau);
        let cost = (tau - verdict.margin).max(0.0) + DISTANCE_WEIGHT * distance(x, &goal);
        (holder, verdict, cost)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, _, root_cost) = evaluate(&start);
    let mut tree: Vec<(Vec<f64>, f64)> = vec![(start.clone(), root_cost)];
    let mut out = Vec::with_capacity(budget);
    let max_attempts = budget.saturating_mul(1000).max(10_000);
    let mut attempts = 0;
    while out.len() < budget {
        attempts += 1;
        if attempts > max_attempts {
            return Err(EstimatorError::Stalled { hc, attempts, evaluated: out.len() });
        }
        let target: Vec<f64> = if rng.random::<f64>() < params.goal_bias {
            goal.clone()
        } else {
            bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect()
        };
        let (near, near_cost) = nearest(&tree, &target);
        let d = distance(near, &target);
        if d < 1e-12 {
            continue;
        }
        let k = (params.step / d).min(1.0);
        let new: Vec<f64> =
            near.iter().zip(&target).zip(&bounds).map(|((a, b), &(lo, hi))| (a + k * (b - a)).clamp(lo, hi)).collect();
        let (holder, verdict, cost) = evaluate(&new);
        if !transition_test(near_cost, cost, params.temperature, &mut rng) {
            continue;
        }
        out.push(ExploredPose { joints: new.clone(), holder, verdict });
        tree.push((new, cost));
    }
    Ok(out)
}

fn nearest<'a>(tree: &'a [(Vec<f64>, f64)], target: &[f64]) -> (&'a [f64], f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, (x, _)) in tree.iter().enumerate() {
        let d: f64 = x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (&tree[best].0, tree[best].1)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tally(c: u64, u: u64) -> StabilityTally {
        StabilityTally::new(c, u, 0, (c + u) as usize).unwrap()
    }

    #[test]
    fn ratio_arithmetic() {
        assert!((stability_ratio(10529, 15).unwrap() - 0.998577).abs() < 1e-6);
        assert_eq!(stability_ratio(12242, 0).unwrap(), 1.0);
        assert_eq!(stability_ratio(0, 0), Err(EstimatorError::UndefinedRatio));
    }

    #[test]
    fn selection_and_ties() {
        let mut m = BTreeMap::new();
        m.insert(HandConfiguration::RL, tally(1, 1));
        m.insert(HandConfiguration::LR, tally(3, 1));
        m.insert(HandConfiguration::RR, tally(3, 1));
        assert_eq!(select_hand_configuration(&m).unwrap(), HandConfiguration::RR);
        assert_eq!(select_hand_configuration(&BTreeMap::new()), Err(EstimatorError::NoCandidates));
    }

    #[test]
    fn transition_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(transition_test(5.0, 4.0, 1.0, &mut rng));
        assert!(transition_test(5.0, 5.0, 1e-12, &mut rng));
        assert!(!transition_test(5.0, 6.0, 1e-12, &mut rng));
    }

    #[test]
    fn hand_choice_strings() {
        let c: HandChoice = serde_json::from_str("\"LR\"").unwrap();
        assert_eq!(c, HandChoice::Fixed(HandConfiguration::LR));
        assert_eq!(serde_json::to_string(&HandChoice::Auto).unwrap(), "\"auto\"");
        assert!(serde_json::from_str::<HandChoice>("\"XY\"").is_err());
    }
}
