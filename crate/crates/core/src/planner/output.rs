use super::{Plan, Removal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One CSV row per plan state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub step: usize,
    pub phase: String,
    pub hand: String,
    pub com_x_mm: f64,
    pub com_y_mm: f64,
    pub com_z_mm: f64,
    pub margin_mm: f64,
    pub stable: u8,
}

impl Plan {
    pub fn rows(&self) -> Vec<PlanRow> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| PlanRow {
                step: i,
                phase: s.phase.as_str().to_string(),
                hand: s.hand.as_str().to_string(),
                com_x_mm: s.verdict.com_world.x,
                com_y_mm: s.verdict.com_world.y,
                com_z_mm: s.verdict.com_world.z,
                margin_mm: s.verdict.margin,
                stable: u8::from(s.verdict.stable),
            })
            .collect()
    }
}

pub fn write_plan_csv(plan: &Plan, path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in plan.rows() {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn write_removal_log(removals: &[Removal], path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in removals {
        writeln!(f, "{r}")?;
    }
    f.flush()
}
