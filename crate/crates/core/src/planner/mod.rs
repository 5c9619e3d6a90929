//! Regrasp planning: a graph of (placement or handover pose) × grasp nodes,
//! searched shortest-first. Path nodes and edge waypoints are validated
//! lazily; the first failure removes its node or edge and the search restarts.

mod graph;
mod output;
mod validate;

pub use graph::{build_regrasp_graph, shortest_path, EdgeKind, GraphEdge, GraphNode, HandRole, NodeSite, RegraspGraph};
pub use output::{write_plan_csv, write_removal_log, PlanRow};
pub use validate::{validate_plan, PlanReport, StepCheck};

use crate::estimator::{ik_seeds, EstimatorError};
use crate::kinematics::{solve_link_ik, Hand, IkParams, Posture, Transform};
use crate::scenario::Scenario;
use crate::scene::{first_collision, Contact};
use crate::stability::{check_posture, Attachment, StabilityVerdict, SystemState};
use nalgebra::Vector3;
use thiserror::Error;

/// Largest joint change between consecutive edge waypoints, rad.
pub const MAX_WAYPOINT_STEP: f64 = 0.1;
/// Height the object is raised before it is carried, mm.
pub const LIFT_MM: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("empty regrasp graph: {0}")]
    EmptyGraph(String),
    #[error("no plan: start and goal disconnected after {} removals", removals.len())]
    NoPlan { removals: Vec<Removal> },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Why a node or edge was removed.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Ik,
    Collision(Contact),
    Unstable,
}

impl Failure {
    pub fn reason(&self) -> &'static str {
        match self {
            Failure::Ik => "ik",
            Failure::Collision(_) => "collision",
            Failure::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Removal {
    Node { id: usize, failure: Failure },
    Edge { a: usize, b: usize, failure: Failure },
}

impl Removal {
    pub fn failure(&self) -> &Failure {
        match self {
            Removal::Node { failure, .. } | Removal::Edge { failure, .. } => failure,
        }
    }
}

impl std::fmt::Display for Removal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Removal::Node { id, failure } => write!(f, "node {id} removed: {}", failure.reason()),
            Removal::Edge { a, b, failure } => write!(f, "edge {a}-{b} removed: {}", failure.reason()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActingHand {
    Left,
    Right,
    Both,
}

impl ActingHand {
    pub fn as_str(self) -> &'static str {
        match self {
            ActingHand::Left => "left",
            ActingHand::Right => "right",
            ActingHand::Both => "both",
        }
    }
}

impl From<Hand> for ActingHand {
    fn from(h: Hand) -> Self {
        match h {
            Hand::Left => ActingHand::Left,
            Hand::Right => ActingHand::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub state: SystemState,
    pub phase: EdgeKind,
    pub hand: ActingHand,
    /// hands whose palms may touch the object in this state
    pub touching: Vec<Hand>,
    /// hand poses an IK solution must reach in this state
    pub targets: Vec<(Hand, Transform)>,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, EdgeKind)>,
    pub start_placement: usize,
    pub goal_placement: usize,
    pub threshold: f64,
    pub min_margin: f64,
    pub removals: Vec<Removal>,
}

impl Plan {
    /// Pick-and-place sub-tasks: one per traversed edge.
    pub fn subtasks(&self) -> usize {
        self.edges.len()
    }
}

/// A state before its checks have run.
#[derive(Debug, Clone)]
struct Waypoint {
    posture: Posture,
    hold: Attachment,
    resting: Transform,
    touching: Vec<Hand>,
    targets: Vec<(Hand, Transform)>,
}

impl Waypoint {
    fn object_pose(&self, frames: &[Transform], scenario: &Scenario) -> Transform {
        let model = &scenario.model;
        match self.hold {
            Attachment::None => self.resting,
            Attachment::InHand { hand, grasp } => frames[model.hand_link(hand)].compose(&grasp),
            Attachment::BothHands { left, .. } => frames[model.hand_link(Hand::Left)].compose(&left),
        }
    }

    /// Collision, then stability at `tau`.
    fn check(&self, scenario: &Scenario, tau: f64) -> Result<(SystemState, StabilityVerdict), Failure> {
        let model = &scenario.model;
        let frames = model.link_frames(&self.posture);
        let object_pose = self.object_pose(&frames, scenario);
        let obj = Some((&scenario.object, &object_pose));
        if let Some(c) = first_collision(model, &frames, obj, &self.touching, &scenario.environment.primitives()) {
            return Err(Failure::Collision(c));
        }
        let state = SystemState { q: model.to_configuration(&self.posture), attachment: self.hold, object_pose };
        let verdict = check_posture(&self.posture, &state, model, Some(&scenario.object), &scenario.polygon, tau)
            .map_err(|_| Failure::Ik)?;
        if !verdict.stable {
            return Err(Failure::Unstable);
        }
        Ok((state, verdict))
    }
}

/// Joints a node's IK may move: the whole arm chain for placement nodes,
/// the arm without the waist in the air so both hands can meet.
fn node_free_joints(scenario: &Scenario, node: &GraphNode) -> Vec<usize> {
    let model = &scenario.model;
    let arm = model.arm_joints(node.hand());
    match node.site {
        NodeSite::Placement(_) => arm,
        NodeSite::InAir(_) => {
            let waist = model.waist_joints();
            arm.into_iter().filter(|j| !waist.contains(j)).collect()
        }
    }
}

fn reach(scenario: &Scenario, hand: Hand, target: &Transform, seeds: &[Posture], free: &[usize]) -> Option<Posture> {
    let link = scenario.model.hand_link(hand);
    let params = IkParams::default();
    seeds.iter().find_map(|s| solve_link_ik(&scenario.model, link, target, s, free, &params).ok()).map(|s| s.posture)
}

fn node_waypoint(node: &GraphNode, posture: Posture) -> Waypoint {
    let hand = node.hand();
    Waypoint {
        posture,
        hold: Attachment::InHand { hand, grasp: node.grasp.transform },
        resting: node.object_pose,
        touching: vec![hand],
        targets: vec![(hand, node.grasp.hand_target(&node.object_pose))],
    }
}

/// Checks a node from scratch: threshold feasibility, IK, collision, stability.
pub fn evaluate_node(scenario: &Scenario, node: &GraphNode, tau: f64) -> Result<(Posture, StabilityVerdict), Failure> {
    // No posture can clear a threshold above the polygon's largest inscribed margin.
    if tau > scenario.polygon.max_margin_bound() {
        return Err(Failure::Unstable);
    }
    let target = node.grasp.hand_target(&node.object_pose);
    let free = node_free_joints(scenario, node);
    let posture = reach(scenario, node.hand(), &target, &ik_seeds(scenario, node.hand()), &free).ok_or(Failure::Ik)?;
    let wp = node_waypoint(node, posture.clone());
    let (_, verdict) = wp.check(scenario, tau)?;
    Ok((posture, verdict))
}

fn lifted(pose: &Transform) -> Transform {
    pose.with_translation(pose.translation + Vector3::new(0.0, 0.0, LIFT_MM))
}

/// Key states of an edge from `a` to `b` (endpoints included) and the
/// hold used between each consecutive pair.
fn edge_keys(
    scenario: &Scenario,
    graph: &RegraspGraph,
    edge: &GraphEdge,
    pa: &Posture,
    pb: &Posture,
) -> Result<(Vec<Waypoint>, Vec<Waypoint>), Failure> {
    let (na, nb) = (&graph.nodes[edge.a], &graph.nodes[edge.b]);
    let wa = node_waypoint(na, pa.clone());
    let wb = node_waypoint(nb, pb.clone());
    match edge.kind {
        EdgeKind::Transfer => {
            let hand = na.hand();
            let free = scenario.model.arm_joints(hand);
            let mut keys = vec![wa.clone()];
            for (n, p) in [(na, pa), (nb, pb)] {
                if let NodeSite::Placement(_) = n.site {
                    let up = lifted(&n.object_pose);
                    let target = n.grasp.hand_target(&up);
                    let mut seeds = vec![p.clone()];
                    seeds.extend(ik_seeds(scenario, hand));
                    let q = reach(scenario, hand, &target, &seeds, &free).ok_or(Failure::Ik)?;
                    keys.push(Waypoint { posture: q, targets: vec![(hand, target)], ..wa.clone() });
                }
            }
            keys.push(wb);
            let segs = vec![Waypoint { targets: vec![], ..wa }; keys.len() - 1];
            Ok((keys, segs))
        }
        EdgeKind::Transit => {
            let mut touching = vec![na.hand(), nb.hand()];
            touching.sort();
            touching.dedup();
            let seg = Waypoint {
                posture: pa.clone(),
                hold: Attachment::None,
                resting: na.object_pose,
                touching,
                targets: vec![],
            };
            Ok((vec![wa, wb], vec![seg]))
        }
        EdgeKind::Handover => {
            let model = &scenario.model;
            let receiver = nb.hand();
            let waist = model.waist_joints();
            let mut both = pa.clone();
            for j in model.arm_joints(receiver).into_iter().filter(|j| !waist.contains(j)) {
                both.joints[j] = pb.joints[j];
            }
            let (left, right) = if na.hand() == Hand::Left {
                (na.grasp.transform, nb.grasp.transform)
            } else {
                (nb.grasp.transform, na.grasp.transform)
            };
            let touching = vec![Hand::Left, Hand::Right];
            let mid = Waypoint {
                posture: both,
                hold: Attachment::BothHands { left, right },
                resting: na.object_pose,
                touching: touching.clone(),
                targets: [wa.targets.clone(), wb.targets.clone()].concat(),
            };
            let give = Waypoint { touching: touching.clone(), targets: vec![], ..wa.clone() };
            let take = Waypoint { touching, targets: vec![], ..wb.clone() };
            Ok((vec![wa, mid, wb], vec![give, take]))
        }
    }
}

fn interpolate(a: &Posture, b: &Posture, t: f64) -> Posture {
    Posture { base: a.base, joints: a.joints.iter().zip(&b.joints).map(|(x, y)| x + t * (y - x)).collect() }
}

fn steps_between(a: &Posture, b: &Posture) -> usize {
    let d = a.joints.iter().zip(&b.joints).map(|(x, y)| (y - x).abs()).fold(0.0, f64::max);
    ((d / MAX_WAYPOINT_STEP).ceil() as usize).max(1)
}

/// Interior states of an edge in its stored direction, endpoints excluded.
fn edge_waypoints(
    scenario: &Scenario,
    graph: &RegraspGraph,
    edge: &GraphEdge,
    pa: &Posture,
    pb: &Posture,
) -> Result<Vec<Waypoint>, Failure> {
    let (keys, segs) = edge_keys(scenario, graph, edge, pa, pb)?;
    let mut out = Vec::new();
    for (i, seg) in segs.iter().enumerate() {
        let (from, to) = (&keys[i].posture, &keys[i + 1].posture);
        let n = steps_between(from, to);
        for s in 1..=n {
            if s == n {
                if i + 1 < keys.len() - 1 {
                    out.push(keys[i + 1].clone());
                }
            } else {
                out.push(Waypoint { posture: interpolate(from, to, s as f64 / n as f64), ..seg.clone() });
            }
        }
    }
    Ok(out)
}

/// Checks every interior waypoint of an edge from scratch.
pub fn evaluate_edge(
    scenario: &Scenario,
    graph: &RegraspGraph,
    edge: &GraphEdge,
    pa: &Posture,
    pb: &Posture,
    tau: f64,
) -> Result<usize, Failure> {
    let wps = edge_waypoints(scenario, graph, edge, pa, pb)?;
    for wp in &wps {
        wp.check(scenario, tau)?;
    }
    Ok(wps.len())
}

/// The lazy search loop. Removed nodes and edges stay removed in `graph`.
pub fn search_plan(graph: &mut RegraspGraph, scenario: &Scenario, tau: f64) -> Result<Plan, PlanError> {
    let mut removals = Vec::new();
    'search: loop {
        let Some((path, path_edges)) = shortest_path(graph) else {
            return Err(PlanError::NoPlan { removals });
        };
        for &id in &path {
            if graph.nodes[id].configuration.is_some() {
                continue;
            }
            match evaluate_node(scenario, &graph.nodes[id], tau) {
                Ok((posture, verdict)) => {
                    graph.nodes[id].configuration = Some(posture);
                    graph.nodes[id].verdict = Some(verdict);
                }
                Err(failure) => {
                    graph.removed_nodes.insert(id);
                    removals.push(Removal::Node { id, failure });
                    continue 'search;
                }
            }
        }
        for &e in &path_edges {
            if graph.edges[e].waypoints.is_some() {
                continue;
            }
            let edge = graph.edges[e].clone();
            let pa = graph.nodes[edge.a].configuration.clone().expect("validated node");
            let pb = graph.nodes[edge.b].configuration.clone().expect("validated node");
            match evaluate_edge(scenario, graph, &edge, &pa, &pb, tau) {
                Ok(n) => graph.edges[e].waypoints = Some(n),
                Err(failure) => {
                    graph.removed_edges.insert(e);
                    removals.push(Removal::Edge { a: edge.a, b: edge.b, failure });
                    continue 'search;
                }
            }
        }
        return Ok(assemble(graph, scenario, tau, &path, &path_edges, removals));
    }
}

fn assemble(
    graph: &RegraspGraph,
    scenario: &Scenario,
    tau: f64,
    path: &[usize],
    path_edges: &[usize],
    removals: Vec<Removal>,
) -> Plan {
    let posture = |n: usize| graph.nodes[n].configuration.clone().expect("validated node");
    let to_step = |wp: &Waypoint, phase: EdgeKind, hand: ActingHand| -> PlanStep {
        let (state, verdict) = wp.check(scenario, tau).expect("validated waypoint");
        PlanStep { state, phase, hand, touching: wp.touching.clone(), targets: wp.targets.clone(), verdict }
    };
    let first = &graph.nodes[path[0]];
    let mut steps = Vec::new();
    let first_phase = path_edges.first().map_or(EdgeKind::Transit, |&e| graph.edges[e].kind);
    steps.push(to_step(&node_waypoint(first, posture(path[0])), first_phase, first.hand().into()));
    let mut edges = Vec::new();
    for (k, &e) in path_edges.iter().enumerate() {
        let edge = &graph.edges[e];
        let (from, to) = (path[k], path[k + 1]);
        let mut wps =
            edge_waypoints(scenario, graph, edge, &posture(edge.a), &posture(edge.b)).expect("validated edge");
        if edge.a != from {
            wps.reverse();
        }
        let end = &graph.nodes[to];
        let hand = match edge.kind {
            EdgeKind::Handover => ActingHand::Both,
            _ => end.hand().into(),
        };
        for wp in &wps {
            steps.push(to_step(wp, edge.kind, hand));
        }
        steps.push(to_step(&node_waypoint(end, posture(to)), edge.kind, hand));
        edges.push((e, edge.kind));
    }
    let min_margin = steps.iter().map(|s| s.verdict.margin).fold(f64::INFINITY, f64::min);
    Plan {
        steps,
        nodes: path.to_vec(),
        edges,
        start_placement: 0,
        goal_placement: 1,
        threshold: tau,
        min_margin,
        removals,
    }
}
