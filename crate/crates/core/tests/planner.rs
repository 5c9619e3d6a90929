mod common;

use biped_regrasp::kinematics::TransformSpec;
use biped_regrasp::planner::{
    build_regrasp_graph, search_plan, validate_plan, EdgeKind, Failure, NodeSite, PlanError, Removal,
};
use biped_regrasp::scenario::{load_scenario, resolve_scenario, Scenario};
use biped_regrasp::scene::StancePreset;
use common::{base_spec, data_dir, exhaustive_min_subtasks, scenario_path, toy_scenario};
use serde_json::Value;
use std::path::Path;

/// The 8 kg box with its grasp list filtered, written to `dir`.
fn box_with_grasps(dir: &Path, keep: impl Fn(usize, &Value) -> bool, edit: impl Fn(&mut Value)) -> std::path::PathBuf {
    let text = std::fs::read_to_string(data_dir().join("objects/box_8kg.json")).unwrap();
    let mut obj: Value = serde_json::from_str(&text).unwrap();
    let grasps: Vec<Value> = obj["grasps"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .filter(|(i, g)| keep(*i, g))
        .map(|(_, g)| g.clone())
        .collect();
    obj["grasps"] = Value::Array(grasps);
    for g in obj["grasps"].as_array_mut().unwrap() {
        edit(g);
    }
    let path = dir.join("box.json");
    std::fs::write(&path, serde_json::to_string(&obj).unwrap()).unwrap();
    path
}

fn custom_scenario(dir: &Path, object: std::path::PathBuf, handover: bool) -> Result<Scenario, String> {
    let mut spec = base_spec("box_8kg.json", StancePreset::Upright, "workcell.json");
    spec.object = object;
    if handover {
        spec.handover_poses = vec![TransformSpec { translation: [380.0, 0.0, 950.0], rotation: None, rpy: None }];
    }
    resolve_scenario(spec, dir, Path::new("custom")).map_err(|e| e.to_string())
}

#[test]
fn edge_count_matches_pairing_oracle() {
    let dir = tempfile::tempdir().unwrap();
    // one top grasp per hand
    let object = box_with_grasps(dir.path(), |i, _| i == 0 || i == 3, |_| {});
    let s = custom_scenario(dir.path(), object, false).unwrap();
    let g = build_regrasp_graph(&s, None).unwrap();
    let grasps = s.object.grasps.len();
    let placements = s.placements().len();
    assert_eq!(placements, 2);
    assert_eq!(g.nodes.len(), placements * grasps);

    let mut transit = 0;
    let mut transfer = 0;
    for a in &g.nodes {
        for b in &g.nodes {
            if a.id >= b.id {
                continue;
            }
            match (a.site, b.site) {
                (NodeSite::Placement(p), NodeSite::Placement(q)) if p == q && a.grasp.id != b.grasp.id => transit += 1,
                (NodeSite::Placement(p), NodeSite::Placement(q)) if p != q && a.grasp.id == b.grasp.id => transfer += 1,
                _ => {}
            }
        }
    }
    // closed form: P·C(G,2) transit and G·C(P,2) transfer edges
    assert_eq!(transit, placements * grasps * (grasps - 1) / 2);
    assert_eq!(transfer, grasps * placements * (placements - 1) / 2);
    let count = |k: EdgeKind| g.edges.iter().filter(|e| e.kind == k).count();
    assert_eq!(count(EdgeKind::Transit), transit);
    assert_eq!(count(EdgeKind::Transfer), transfer);
    assert_eq!(count(EdgeKind::Handover), 0);
}

#[test]
fn single_hand_objects_get_no_handover_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let object = box_with_grasps(dir.path(), |_, g| g["hand"] == "left", |_| {});
    let s = custom_scenario(dir.path(), object, true).unwrap();
    assert_eq!(s.handover_poses.len(), 1);
    let g = build_regrasp_graph(&s, None).unwrap();
    assert_eq!(g.handover_node_count(), 0);
    assert!(g.edges.iter().all(|e| e.kind != EdgeKind::Handover));

    let both = custom_scenario(dir.path(), data_dir().join("objects/box_8kg.json"), true).unwrap();
    let g = build_regrasp_graph(&both, None).unwrap();
    assert_eq!(g.handover_node_count(), 2 * both.object.grasps.len());
}

#[test]
fn grasps_from_below_leave_an_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let object = box_with_grasps(dir.path(), |_, _| true, |g| g["approach"] = serde_json::json!([0, 0, 1]));
    let s = custom_scenario(dir.path(), object, false).unwrap();
    assert!(matches!(build_regrasp_graph(&s, None), Err(PlanError::EmptyGraph(_))));
}

#[test]
fn toy_plans_are_minimal_and_valid() {
    for seed in 0..20 {
        let s = toy_scenario(seed);
        let mut g = build_regrasp_graph(&s, None).unwrap();
        let oracle = exhaustive_min_subtasks(&g, &s, s.threshold, 8);
        match search_plan(&mut g, &s, s.threshold) {
            Ok(plan) => {
                assert_eq!(Some(plan.subtasks()), oracle, "seed {seed}");
                for tau in [s.threshold, s.threshold / 2.0] {
                    let report = validate_plan(&plan, &s, tau);
                    assert!(report.valid, "seed {seed} tau {tau}: {:?}", report.first_invalid);
                }
                assert!(plan.min_margin >= s.threshold);
            }
            Err(PlanError::NoPlan { .. }) => assert_eq!(oracle, None, "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn impossible_threshold_removes_nodes_as_unstable() {
    let s = load_scenario(&scenario_path("upright")).unwrap().with_threshold(1e6);
    let mut g = build_regrasp_graph(&s, None).unwrap();
    match search_plan(&mut g, &s, 1e6) {
        Err(PlanError::NoPlan { removals }) => {
            assert!(!removals.is_empty());
            assert!(removals.iter().all(|r| matches!(r, Removal::Node { failure: Failure::Unstable, .. })));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_flags_a_corrupted_step() {
    let s = load_scenario(&scenario_path("staggered")).unwrap();
    let mut g = build_regrasp_graph(&s, None).unwrap();
    let plan = search_plan(&mut g, &s, s.threshold).unwrap();
    assert!(validate_plan(&plan, &s, s.threshold).valid);
    let k = plan.steps.len() / 2;
    let mut bad = plan.clone();
    bad.steps[k].verdict.margin = s.threshold - 1.0;
    let report = validate_plan(&bad, &s, s.threshold);
    assert!(!report.valid);
    assert_eq!(report.first_invalid, Some(k));
}

#[test]
fn planning_is_deterministic() {
    let s = load_scenario(&scenario_path("handover")).unwrap();
    let run = || {
        let mut g = build_regrasp_graph(&s, None).unwrap();
        search_plan(&mut g, &s, s.threshold).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.edges, b.edges);
    assert_eq!(a.removals, b.removals);
    assert_eq!(a.rows(), b.rows());
}
