#![allow(dead_code)]

use biped_regrasp::estimator::{HandChoice, SamplerParams};
use biped_regrasp::geometry::{ConvexPolygon, Point2};
use biped_regrasp::kinematics::{
    Configuration, FeetSpec, FootSpec, Hand, HandsSpec, JointSpec, LinkSpec, RobotModel, RobotModelSpec, Transform,
    TransformSpec,
};
use biped_regrasp::planner::{build_regrasp_graph, evaluate_edge, evaluate_node, RegraspGraph};
use biped_regrasp::scenario::{resolve_scenario, PlacementSelector, Scenario, ScenarioSpec, StanceChoice};
use biped_regrasp::scene::{Face, PlacementGrid, StancePreset};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn scenario_path(name: &str) -> PathBuf {
    data_dir().join("scenarios").join(format!("{name}.json"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pt(x: f64, y: f64) -> Point2 {
    Point2::new(x, y).unwrap()
}

/// Hull vertices by the definition: an edge (i, j) is on the hull iff no
/// other point lies to its right. Endpoints of such edges, minus points
/// strictly inside a hull edge.
pub fn brute_force_hull(points: &[Point2]) -> Vec<Point2> {
    let n = points.len();
    let orient = |a: Point2, b: Point2, c: Point2| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let mut verts: Vec<Point2> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (points[i], points[j]);
            let all_left = (0..n).filter(|&k| k != i && k != j).all(|k| {
                // signed distance from the line a-b, mm
                let o = orient(a, b, points[k]) / a.distance(b);
                if o.abs() <= 1e-9 {
                    // collinear: must lie between a and b
                    let t = ((points[k].x - a.x) * (b.x - a.x) + (points[k].y - a.y) * (b.y - a.y))
                        / ((b.x - a.x).powi(2) + (b.y - a.y).powi(2));
                    (0.0..=1.0).contains(&t)
                } else {
                    o > 0.0
                }
            });
            if all_left {
                for p in [a, b] {
                    if !verts.iter().any(|v| v.x == p.x && v.y == p.y) {
                        verts.push(p);
                    }
                }
            }
        }
    }
    verts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    verts
}

/// Signed distance to the boundary from `samples` points spread along the
/// edges in proportion to their length (vertices always included).
pub fn sampled_margin(poly: &ConvexPolygon, p: Point2, samples: usize) -> f64 {
    let edges: Vec<(Point2, Point2)> = poly.edges().collect();
    let perimeter: f64 = edges.iter().map(|(a, b)| a.distance(*b)).sum();
    let mut best = f64::INFINITY;
    for (a, b) in &edges {
        let k = ((a.distance(*b) / perimeter) * samples as f64).ceil().max(1.0) as usize;
        for s in 0..=k {
            let t = s as f64 / k as f64;
            let (x, y) = (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            let d = ((x - p.x).powi(2) + (y - p.y).powi(2)).sqrt();
            if d < best {
                best = d;
            }
        }
    }
    if poly.contains(p) {
        best
    } else {
        -best
    }
}

/// Random convex polygon: hull of points on a jittered ellipse.
pub fn random_polygon(rng: &mut ChaCha8Rng) -> ConvexPolygon {
    let n = rng.random_range(3..12);
    let (rx, ry) = (rng.random_range(50.0..400.0), rng.random_range(50.0..400.0));
    let (cx, cy) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
    loop {
        let pts: Vec<Point2> = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r: f64 = rng.random_range(0.7..1.0);
                pt(cx + rx * r * a.cos(), cy + ry * r * a.sin())
            })
            .collect();
        if let Ok(p) = biped_regrasp::geometry::convex_hull(&pts) {
            return p;
        }
    }
}

pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

pub fn homogeneous(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

pub fn to_h(t: &Transform) -> Matrix4<f64> {
    homogeneous(&t.rotation, &t.translation)
}

/// World 4×4 of every link by walking parent pointers of the file spec and
/// multiplying the chain root-first. Shares nothing with the library FK.
pub fn naive_fk(
    spec: &RobotModelSpec,
    base: &Matrix4<f64>,
    joints: &BTreeMap<String, f64>,
) -> BTreeMap<String, Matrix4<f64>> {
    let by_name: BTreeMap<&str, &LinkSpec> = spec.links.iter().map(|l| (l.name.as_str(), l)).collect();
    let local = |l: &LinkSpec| -> Matrix4<f64> {
        let o = &l.origin;
        let r = match (&o.rotation, &o.rpy) {
            (Some(rows), _) => Matrix3::new(
                rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0], rows[2][1],
                rows[2][2],
            ),
            (None, Some([r, p, y])) => {
                rodrigues(&Vector3::z(), *y) * rodrigues(&Vector3::y(), *p) * rodrigues(&Vector3::x(), *r)
            }
            (None, None) => Matrix3::identity(),
        };
        let origin = homogeneous(&r, &Vector3::from(o.translation));
        match &l.joint {
            JointSpec::Fixed => origin,
            JointSpec::Revolute { axis, .. } => {
                origin * homogeneous(&rodrigues(&Vector3::from(*axis), joints[&l.name]), &Vector3::zeros())
            }
        }
    };
    let mut out = BTreeMap::new();
    for l in &spec.links {
        let mut chain = vec![l];
        let mut cur = l;
        while let Some(p) = &cur.parent {
            cur = by_name[p.as_str()];
            chain.push(cur);
        }
        let mut m = *base;
        for c in chain.iter().rev() {
            m *= local(c);
        }
        out.insert(l.name.clone(), m);
    }
    out
}

pub fn apply_h(m: &Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let v = m * Vector4::new(p.x, p.y, p.z, 1.0);
    Vector3::new(v.x, v.y, v.z)
}

/// A random tree of 2..=14 links with random axes, offsets, masses and CoMs.
/// Revolute joints are named after their link.
pub fn random_model_spec(rng: &mut ChaCha8Rng) -> RobotModelSpec {
    let n = rng.random_range(2..=14);
    let mut links = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 { None } else { Some(format!("l{}", rng.random_range(0..i))) };
        let joint = if i == 0 || rng.random_bool(0.2) {
            JointSpec::Fixed
        } else {
            let a = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a = if a.norm() < 1e-3 { Vector3::z() } else { a.normalize() };
            // home defaults to zero, so the range must contain it
            JointSpec::Revolute {
                axis: [a.x, a.y, a.z],
                limits: [rng.random_range(-3.0..0.0), rng.random_range(0.0..3.0)],
            }
        };
        let mut v = || rng.random_range(-300.0..300.0);
        let translation = [v(), v(), v()];
        let com = [v(), v(), v()];
        let rpy = [rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0)];
        links.push(LinkSpec {
            name: format!("l{i}"),
            parent,
            joint,
            origin: TransformSpec { translation, rotation: None, rpy: Some(rpy) },
            mass: if i == 0 { rng.random_range(1.0..40.0) } else { rng.random_range(0.0..20.0) },
            com,
            collision: Vec::new(),
        });
    }
    let pick = |rng: &mut ChaCha8Rng| format!("l{}", rng.random_range(0..n));
    let corners = [[-100.0, -70.0, -90.0], [150.0, -70.0, -90.0], [150.0, 70.0, -90.0], [-100.0, 70.0, -90.0]];
    RobotModelSpec {
        name: "random".into(),
        links,
        hands: HandsSpec { left: pick(rng), right: pick(rng) },
        feet: FeetSpec { left: FootSpec { link: pick(rng), corners }, right: FootSpec { link: pick(rng), corners } },
        collision_exclusions: Vec::new(),
        home: BTreeMap::new(),
    }
}

/// Uniform joint values within limits and a random base pose.
pub fn random_configuration(model: &RobotModel, rng: &mut ChaCha8Rng) -> Configuration {
    let joint_values = (0..model.dof())
        .map(|j| {
            let (lo, hi) = model.joint_limits(j);
            (model.joint_name(j).to_string(), if hi > lo { rng.random_range(lo..=hi) } else { lo })
        })
        .collect();
    let base = Transform::from_rpy_translation(
        [rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0)],
        [rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0), rng.random_range(0.0..1000.0)],
    );
    Configuration { base_pose: base, joint_values }
}

/// Largest relative deviation between two vectors, scaled by `scale`.
pub fn rel_err(a: &Vector3<f64>, b: &Vector3<f64>, scale: f64) -> f64 {
    (a - b).norm() / scale.max(1.0)
}

/// A scenario spec on the bundled robot with absolute file paths.
pub fn base_spec(object: &str, stance: StancePreset, environment: &str) -> ScenarioSpec {
    let d = data_dir();
    ScenarioSpec {
        name: "toy".into(),
        robot: d.join("models/biped.json"),
        environment: d.join("environments").join(environment),
        object: d.join("objects").join(object),
        stance: StanceChoice::Preset(stance),
        start: PlacementSelector { surface: "right_table".into(), face: Face::NegZ, x: 400.0, y: -260.0, yaw: 0.0 },
        goal: PlacementSelector { surface: "left_table".into(), face: Face::NegZ, x: 400.0, y: 260.0, yaw: 0.0 },
        intermediate_surfaces: Vec::new(),
        placement_grid: PlacementGrid { positions: [1, 1], yaws: 1 },
        handover_poses: Vec::new(),
        threshold_mm: 60.0,
        hand_configuration: HandChoice::Any,
        sampler: SamplerParams::default(),
        output_dir: std::env::temp_dir(),
    }
}

/// Seeded small planning problems on the bundled robot and workcell.
/// Specs that do not resolve, or whose graph exceeds 100 nodes, are redrawn.
pub fn toy_scenario(seed: u64) -> Scenario {
    let mut r = rng(1000 + seed);
    loop {
        let stance = [StancePreset::Upright, StancePreset::Staggered, StancePreset::Crouched][r.random_range(0..3)];
        let env = if stance == StancePreset::Crouched { "workcell_low.json" } else { "workcell.json" };
        let object = ["box_8kg.json", "box_offset_5kg.json", "bar_5kg.json", "drill.json"][r.random_range(0..4)];
        let mut spec = base_spec(object, stance, env);
        let environment = biped_regrasp::scene::Environment::from_file(&spec.environment).unwrap();
        let pick = |names: &[&str], r: &mut ChaCha8Rng| {
            let name = names[r.random_range(0..names.len())];
            let s = environment.surface(name).unwrap();
            let (hx, hy) = (s.half_extents[0] * 0.2, s.half_extents[1] * 0.2);
            PlacementSelector {
                surface: name.into(),
                face: Face::NegZ,
                x: s.center[0] + r.random_range(-hx..=hx),
                y: s.center[1] + r.random_range(-hy..=hy),
                yaw: [0.0, std::f64::consts::FRAC_PI_2][r.random_range(0..2)],
            }
        };
        spec.start = pick(&["right_table", "right_table", "right_table", "far_right_table"], &mut r);
        spec.goal = pick(&["left_table", "left_table", "left_table", "far_left_table"], &mut r);
        if r.random_bool(0.7) {
            spec.intermediate_surfaces = vec!["center_table".into()];
        }
        spec.placement_grid = PlacementGrid { positions: [1, 1], yaws: r.random_range(1..=2) };
        if r.random_bool(0.5) {
            let z = if stance == StancePreset::Crouched { 770.0 } else { 950.0 };
            spec.handover_poses =
                vec![TransformSpec { translation: [r.random_range(200.0..450.0), 0.0, z], rotation: None, rpy: None }];
        }
        spec.threshold_mm = [30.0, 45.0, 60.0][r.random_range(0..3)];
        let Ok(s) = resolve_scenario(spec, &data_dir(), std::path::Path::new("toy")) else { continue };
        if build_regrasp_graph(&s, None).is_ok_and(|g| g.nodes.len() <= 100) {
            return s;
        }
    }
}

/// Fewest edges over all simple start-to-goal paths whose every node and
/// edge passes its checks, found by exhaustive depth-bounded enumeration.
pub fn exhaustive_min_subtasks(graph: &RegraspGraph, scenario: &Scenario, tau: f64, max_len: usize) -> Option<usize> {
    let postures: Vec<_> = graph.nodes.iter().map(|n| evaluate_node(scenario, n, tau).ok().map(|(p, _)| p)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
    for e in &graph.edges {
        let (Some(pa), Some(pb)) = (&postures[e.a], &postures[e.b]) else { continue };
        if evaluate_edge(scenario, graph, e, pa, pb, tau).is_ok() {
            adj[e.a].push(e.b);
            if !e.directed {
                adj[e.b].push(e.a);
            }
        }
    }
    let goals: BTreeSet<usize> = graph.goal_nodes.iter().copied().filter(|&g| postures[g].is_some()).collect();
    fn reach(u: usize, left: usize, adj: &[Vec<usize>], goals: &BTreeSet<usize>, on: &mut Vec<bool>) -> bool {
        if goals.contains(&u) {
            return true;
        }
        if left == 0 {
            return false;
        }
        for &v in &adj[u] {
            if !on[v] {
                on[v] = true;
                let ok = reach(v, left - 1, adj, goals, on);
                on[v] = false;
                if ok {
                    return true;
                }
            }
        }
        false
    }
    let starts: Vec<usize> = graph.start_nodes.iter().copied().filter(|&s| postures[s].is_some()).collect();
    (0..=max_len).find(|&len| {
        starts.iter().any(|&s| {
            let mut on = vec![false; graph.nodes.len()];
            on[s] = true;
            reach(s, len, &adj, &goals, &mut on)
        })
    })
}

/// A random configuration of `hand`'s arm with everything else at home.
pub fn arm_sample(model: &RobotModel, hand: Hand, r: &mut impl Rng) -> Configuration {
    let mut p = model.home_posture(Transform::from_translation(0.0, 0.0, 830.0));
    for j in model.arm_joints(hand) {
        let (lo, hi) = model.joint_limits(j);
        p.joints[j] = r.random_range(lo..=hi);
    }
    model.to_configuration(&p)
}
