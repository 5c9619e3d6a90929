//! Command-line entry point: `plan`, `evaluate` and `margin`.

use crate::estimator::{
    estimate_task_stability, select_hand_configuration, HandChoice, HandConfiguration, StabilityTally,
};
use crate::kinematics::Posture;
use crate::planner::{
    build_regrasp_graph, search_plan, validate_plan, write_plan_csv, write_removal_log, Plan, PlanError, Removal,
};
use crate::scenario::{load_scenario, Scenario};
use crate::stability::{check_state, Attachment, SystemState};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_PLAN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "biped-regrasp", version, about = "Stability-constrained regrasp planning for a biped")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a start-to-goal regrasp sequence; writes plan.csv, removals.log and summary.json.
    Plan(PlanArgs),
    /// Estimate the stability ratio of all four hand configurations.
    Evaluate(CommonArgs),
    /// Print the stability verdict of one configuration.
    Margin(MarginArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// stability threshold, mm (overrides the scenario)
    #[arg(long)]
    pub threshold_mm: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// poses evaluated per hand configuration
    #[arg(long)]
    pub samples: Option<usize>,
    /// output directory (default: the scenario's output_dir, normally ./out)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// LL, RR, LR, RL, auto or any (overrides the scenario)
    #[arg(long)]
    pub hands: Option<String>,
}

#[derive(Debug, Args)]
pub struct MarginArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub threshold_mm: Option<f64>,
    /// joint override on top of the stance posture, `name=radians`; repeatable
    #[arg(long = "joint", value_name = "NAME=RAD")]
    pub joints: Vec<String>,
    /// name of a grasp holding the object; the object pose follows the hand
    #[arg(long)]
    pub hold: Option<String>,
}

#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan(a) => run_plan(&a),
        Command::Evaluate(a) => run_evaluate(&a),
        Command::Margin(a) => run_margin(&a),
    };
    match result {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
    }
}

fn load(common: &CommonArgs) -> Result<(Scenario, PathBuf), InputError> {
    let mut scenario = load_scenario(&common.scenario)?;
    if let Some(t) = common.threshold_mm {
        if !(t.is_finite() && t >= 0.0) {
            return Err(InputError(format!("--threshold-mm must be finite and >= 0, got {t}")));
        }
        scenario = scenario.with_threshold(t);
    }
    if let Some(s) = common.seed {
        scenario.spec.sampler.seed = s;
    }
    if let Some(n) = common.samples {
        scenario.spec.sampler.samples = n;
    }
    scenario.spec.sampler.validate().map_err(|m| InputError(format!("sampler: {m}")))?;
    let out = common.out_dir.clone().unwrap_or_else(|| scenario.spec.output_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| InputError(format!("{}: {e}", out.display())))?;
    Ok((scenario, out))
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum TallyEntry {
    Tally(StabilityTally),
    Error { error: String },
}

/// Runs the estimator for every hand configuration.
pub fn evaluate_all(scenario: &Scenario) -> BTreeMap<HandConfiguration, Result<StabilityTally, String>> {
    HandConfiguration::ALL
        .into_iter()
        .map(|hc| (hc, estimate_task_stability(scenario, hc, &scenario.spec.sampler).map_err(|e| e.to_string())))
        .collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// The evaluation summary document.
pub fn evaluation_summary(
    scenario: &Scenario,
    results: &BTreeMap<HandConfiguration, Result<StabilityTally, String>>,
) -> Value {
    let tallies: BTreeMap<HandConfiguration, StabilityTally> =
        results.iter().filter_map(|(hc, r)| r.as_ref().ok().map(|t| (*hc, *t))).collect();
    let selected = select_hand_configuration(&tallies).ok();
    let entries: BTreeMap<String, TallyEntry> = results
        .iter()
        .map(|(hc, r)| {
            let e = match r {
                Ok(t) => TallyEntry::Tally(StabilityTally { ratio: round6(t.ratio), ..*t }),
                Err(msg) => TallyEntry::Error { error: msg.clone() },
            };
            (hc.to_string(), e)
        })
        .collect();
    json!({
        "scenario": scenario.spec.name,
        "threshold_mm": scenario.threshold,
        "seed": scenario.spec.sampler.seed,
        "samples": scenario.spec.sampler.samples,
        "tallies": entries,
        "selected": selected.map(|h| h.to_string()),
    })
}

fn write_json(path: &Path, value: &Value) -> Result<(), InputError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn run_evaluate(args: &CommonArgs) -> Result<i32, InputError> {
    let (scenario, out) = load(args)?;
    let results = evaluate_all(&scenario);
    let summary = evaluation_summary(&scenario, &results);
    write_json(&out.join("evaluation.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if summary["selected"].is_null() {
        return Err(InputError("no hand configuration has IK-feasible start and goal states".into()));
    }
    Ok(EXIT_OK)
}

fn run_plan(args: &PlanArgs) -> Result<i32, InputError> {
    let (scenario, out) = load(&args.common)?;
    let choice = match &args.hands {
        Some(h) => HandChoice::try_from(h.clone()).map_err(InputError)?,
        None => scenario.spec.hand_configuration,
    };
    let mut estimation = Value::Null;
    let hands = match choice {
        HandChoice::Fixed(hc) => Some(hc),
        HandChoice::Any => None,
        HandChoice::Auto => {
            let results = evaluate_all(&scenario);
            estimation = evaluation_summary(&scenario, &results);
            let picked = estimation["selected"].as_str().map(|s| s.parse::<HandConfiguration>()).transpose()?;
            Some(picked.ok_or_else(|| InputError("auto: no hand configuration has feasible endpoints".into()))?)
        }
    };

    let outcome = build_regrasp_graph(&scenario, hands)
        .and_then(|mut graph| search_plan(&mut graph, &scenario, scenario.threshold).map(|p| (graph, p)));
    let log_path = out.join("removals.log");
    let mut summary = json!({
        "scenario": scenario.spec.name,
        "threshold_mm": scenario.threshold,
        "seed": scenario.spec.sampler.seed,
        "hand_configuration": hands.map(|h| h.to_string()).unwrap_or_else(|| "any".into()),
        "estimation": estimation,
    });
    match outcome {
        Ok((graph, plan)) => {
            let report = validate_plan(&plan, &scenario, scenario.threshold);
            write_plan_csv(&plan, &out.join("plan.csv"))?;
            write_removal_log(&plan.removals, &log_path)?;
            fill_plan_summary(&mut summary, &plan, graph.nodes.len(), graph.edges.len());
            summary["valid"] = json!(report.valid);
            write_json(&out.join("summary.json"), &summary)?;
            if !report.valid {
                return Err(InputError(format!("plan failed re-validation at step {:?}", report.first_invalid)));
            }
            println!(
                "plan found: sub-tasks {}, states {}, min margin {:.3} mm (threshold {} mm)",
                plan.subtasks(),
                plan.steps.len(),
                plan.min_margin,
                scenario.threshold
            );
            Ok(EXIT_OK)
        }
        Err(PlanError::NoPlan { removals }) => {
            write_removal_log(&removals, &log_path)?;
            summary["status"] = json!("no_plan");
            summary["removals"] = json!(removals.len());
            write_json(&out.join("summary.json"), &summary)?;
            eprintln!("no plan: start and goal disconnected after {} removals", removals.len());
            Ok(EXIT_NO_PLAN)
        }
        Err(PlanError::EmptyGraph(msg)) => {
            write_removal_log(&Vec::<Removal>::new(), &log_path)?;
            summary["status"] = json!("no_plan");
            summary["reason"] = json!(msg);
            write_json(&out.join("summary.json"), &summary)?;
            eprintln!("no plan: {msg}");
            Ok(EXIT_NO_PLAN)
        }
        Err(e) => Err(InputError(e.to_string())),
    }
}

fn fill_plan_summary(summary: &mut Value, plan: &Plan, nodes: usize, edges: usize) {
    summary["status"] = json!("plan");
    summary["subtasks"] = json!(plan.subtasks());
    summary["states"] = json!(plan.steps.len());
    summary["min_margin_mm"] = json!(round6(plan.min_margin));
    summary["path_nodes"] = json!(plan.nodes);
    summary["path_edges"] = json!(plan.edges.iter().map(|(_, k)| k.as_str()).collect::<Vec<_>>());
    summary["removals"] = json!(plan.removals.len());
    summary["graph"] = json!({ "nodes": nodes, "edges": edges });
}

fn run_margin(args: &MarginArgs) -> Result<i32, InputError> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(t) = args.threshold_mm {
        if !(t.is_finite() && t >= 0.0) {
            return Err(InputError(format!("--threshold-mm must be finite and >= 0, got {t}")));
        }
        scenario = scenario.with_threshold(t);
    }
    let model = &scenario.model;
    let mut posture: Posture = scenario.stance.posture.clone();
    for j in &args.joints {
        let (name, value) =
            j.split_once('=').ok_or_else(|| InputError(format!("--joint expects NAME=RAD, got `{j}`")))?;
        let idx =
            model.joint_index(name.trim()).ok_or_else(|| InputError(format!("--joint: unknown joint `{name}`")))?;
        posture.joints[idx] =
            value.trim().parse().map_err(|_| InputError(format!("--joint {name}: `{value}` is not a number")))?;
    }
    let q = model.to_configuration(&posture);
    let state = match &args.hold {
        None => SystemState { q, attachment: Attachment::None, object_pose: scenario.start.pose },
        Some(name) => {
            let g = scenario
                .object
                .grasps
                .iter()
                .find(|g| &g.name == name)
                .ok_or_else(|| InputError(format!("--hold: unknown grasp `{name}`")))?;
            SystemState::attached(model, q, Attachment::InHand { hand: g.hand, grasp: g.transform })?
        }
    };
    let v = check_state(&state, model, Some(&scenario.object), &scenario.polygon, scenario.threshold)?;
    let doc = json!({
        "com_world_mm": [v.com_world.x, v.com_world.y, v.com_world.z],
        "projection_mm": [v.projection.x, v.projection.y],
        "margin_mm": v.margin,
        "stable": v.stable,
        "threshold_mm": v.threshold,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(EXIT_OK)
}
