use super::PlanError;
use crate::estimator::{approach_allowed, HandConfiguration};
use crate::kinematics::{Hand, Posture, Transform};
use crate::scenario::Scenario;
use crate::scene::Grasp;
use crate::stability::StabilityVerdict;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Transit,
    Transfer,
    Handover,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Transit => "transit",
            EdgeKind::Transfer => "transfer",
            EdgeKind::Handover => "handover",
        }
    }
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandRole {
    Single,
    HandoverGiver,
    HandoverReceiver,
}

/// Where the object is while a node's grasp holds it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSite {
    /// index into [`Scenario::placements`]
    Placement(usize),
    /// index into the scenario's handover poses
    InAir(usize),
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: usize,
    pub site: NodeSite,
    pub grasp: Grasp,
    pub role: HandRole,
    pub object_pose: Transform,
    /// set once the node has passed IK, collision and stability checks
    pub configuration: Option<Posture>,
    pub verdict: Option<StabilityVerdict>,
}

impl GraphNode {
    pub fn hand(&self) -> Hand {
        self.grasp.hand
    }
}

#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub id: usize,
    pub kind: EdgeKind,
    pub a: usize,
    pub b: usize,
    /// handover and placement-to-air edges run one way only
    pub directed: bool,
    /// interior waypoints, known once the edge has been validated
    pub waypoints: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RegraspGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub start_nodes: Vec<usize>,
    pub goal_nodes: Vec<usize>,
    pub removed_nodes: BTreeSet<usize>,
    pub removed_edges: BTreeSet<usize>,
    /// (neighbour, edge id) per node, ascending by neighbour
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RegraspGraph {
    pub fn neighbours(&self, n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency[n]
            .iter()
            .copied()
            .filter(move |&(m, e)| !self.removed_nodes.contains(&m) && !self.removed_edges.contains(&e))
    }

    pub fn is_live(&self, n: usize) -> bool {
        !self.removed_nodes.contains(&n)
    }

    /// Placement nodes at placement `p`.
    pub fn nodes_at(&self, p: usize) -> impl Iterator<Item = &GraphNode> {
        self.nodes.iter().filter(move |n| n.site == NodeSite::Placement(p))
    }

    pub fn handover_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.site, NodeSite::InAir(_))).count()
    }
}

/// Placement nodes for every (placement, grasp) pair whose approach does
/// not come from below, giver and receiver nodes per handover pose for
/// grasps with an opposite-hand partner, and the transit / transfer /
/// handover edges between them. `hands` restricts which hand may start
/// and which may finish.
pub fn build_regrasp_graph(scenario: &Scenario, hands: Option<HandConfiguration>) -> Result<RegraspGraph, PlanError> {
    let placements = scenario.placements();
    let grasps = &scenario.object.grasps;
    let mut nodes: Vec<GraphNode> = Vec::new();
    let node = |id, site, grasp: &Grasp, role, object_pose| GraphNode {
        id,
        site,
        grasp: grasp.clone(),
        role,
        object_pose,
        configuration: None,
        verdict: None,
    };

    for (p, placement) in placements.iter().enumerate() {
        for g in grasps.iter().filter(|g| approach_allowed(g, &placement.pose)) {
            nodes.push(node(nodes.len(), NodeSite::Placement(p), g, HandRole::Single, placement.pose));
        }
    }
    for (h, pose) in scenario.handover_poses.iter().enumerate() {
        for role in [HandRole::HandoverGiver, HandRole::HandoverReceiver] {
            for g in grasps.iter().filter(|g| grasps.iter().any(|o| o.hand != g.hand)) {
                nodes.push(node(nodes.len(), NodeSite::InAir(h), g, role, *pose));
            }
        }
    }

    let start_nodes: Vec<usize> = nodes
        .iter()
        .filter(|n| n.site == NodeSite::Placement(0) && hands.is_none_or(|hc| n.hand() == hc.start_hand()))
        .map(|n| n.id)
        .collect();
    let goal_nodes: Vec<usize> = nodes
        .iter()
        .filter(|n| n.site == NodeSite::Placement(1) && hands.is_none_or(|hc| n.hand() == hc.end_hand()))
        .map(|n| n.id)
        .collect();
    if start_nodes.is_empty() {
        return Err(PlanError::EmptyGraph("no grasp is compatible with the start placement".into()));
    }
    if goal_nodes.is_empty() {
        return Err(PlanError::EmptyGraph("no grasp is compatible with the goal placement".into()));
    }

    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut add = |kind, a, b, directed| {
        let id = edges.len();
        edges.push(GraphEdge { id, kind, a, b, directed, waypoints: None });
    };
    for a in &nodes {
        for b in nodes.iter().filter(|b| b.id > a.id) {
            let (NodeSite::Placement(pa), NodeSite::Placement(pb)) = (a.site, b.site) else { continue };
            if pa != pb && a.grasp.id == b.grasp.id {
                add(EdgeKind::Transfer, a.id, b.id, false);
            } else if pa == pb && a.grasp.id != b.grasp.id {
                add(EdgeKind::Transit, a.id, b.id, false);
            }
        }
    }
    for air in nodes.iter().filter(|n| matches!(n.site, NodeSite::InAir(_))) {
        for p in nodes.iter().filter(|n| matches!(n.site, NodeSite::Placement(_)) && n.grasp.id == air.grasp.id) {
            match air.role {
                HandRole::HandoverGiver => add(EdgeKind::Transfer, p.id, air.id, true),
                _ => add(EdgeKind::Transfer, air.id, p.id, true),
            }
        }
    }
    for giver in nodes.iter().filter(|n| n.role == HandRole::HandoverGiver) {
        for receiver in nodes
            .iter()
            .filter(|n| n.role == HandRole::HandoverReceiver && n.site == giver.site && n.hand() != giver.hand())
        {
            add(EdgeKind::Handover, giver.id, receiver.id, true);
        }
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for e in &edges {
        adjacency[e.a].push((e.b, e.id));
        if !e.directed {
            adjacency[e.b].push((e.a, e.id));
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    Ok(RegraspGraph {
        nodes,
        edges,
        start_nodes,
        goal_nodes,
        removed_nodes: BTreeSet::new(),
        removed_edges: BTreeSet::new(),
        adjacency,
    })
}

/// Shortest start-to-goal path by edge count over live nodes and edges;
/// among equals, the lexicographically smallest node sequence. Returns
/// (nodes, edges).
pub fn shortest_path(graph: &RegraspGraph) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = graph.nodes.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    // Sorted sources and sorted adjacency make first discovery the
    // lexicographically smallest shortest path to every node.
    for &s in &graph.start_nodes {
        if graph.is_live(s) {
            seen[s] = true;
            queue.push_back((s, 0usize));
        }
    }
    let goals: BTreeSet<usize> = graph.goal_nodes.iter().copied().filter(|&g| graph.is_live(g)).collect();
    let mut found: Vec<usize> = Vec::new();
    let mut found_depth = None;
    while let Some((u, d)) = queue.pop_front() {
        if found_depth.is_some_and(|fd| d > fd) {
            break;
        }
        if goals.contains(&u) {
            found.push(u);
            found_depth = Some(d);
            continue;
        }
        for (v, e) in graph.neighbours(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, e));
                queue.push_back((v, d + 1));
            }
        }
    }
    let trace = |g: usize| {
        let mut nodes = vec![g];
        let mut edges = Vec::new();
        let mut cur = g;
        while let Some((p, e)) = parent[cur] {
            nodes.push(p);
            edges.push(e);
            cur = p;
        }
        nodes.reverse();
        edges.reverse();
        (nodes, edges)
    };
    found.into_iter().map(trace).min_by(|a, b| a.0.cmp(&b.0))
}
