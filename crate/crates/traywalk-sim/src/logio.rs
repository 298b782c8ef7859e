//! Run logs and their on-disk formats.
//!
//! A run produces one `log.json` holding the full scenario plus every time
//! series, one CSV per signal group (`base.csv`, `footholds.csv`, and
//! `wbc.csv` for dynamic runs), and a `summary.json`. CSV floats use the
//! shortest round-trip `Display` form, so reruns with the same seed are
//! byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogIoError {
    #[error("failed to write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("failed to read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("failed to parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("failed to serialize log: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// One planner tick. Positions and barrier values are sampled at the tick
/// time, before the integration step the tick commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub pos: [f64; 2],
    pub h_path: f64,
    pub h_gait: f64,
    pub nu_d: [f64; 2],
    pub nu_safe: [f64; 2],
    /// Scripted safety-filter flag during this tick.
    pub filter_active: bool,
    /// Whether the barrier constraint modified the command.
    pub cbf_active: bool,
    /// Raw threshold rule applied to h_gait.
    pub gait_selected: GaitLabel,
    /// Gait executed by the phase machine during this tick.
    pub gait_active: GaitLabel,
    pub phase: usize,
    /// A phase boundary fired during this tick.
    pub phase_boundary: bool,
    /// The active gait changed during this tick.
    pub gait_switched: bool,
    pub waypoint_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaitLabel {
    Trot,
    QuasiStatic,
}

impl GaitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GaitLabel::Trot => "trot",
            GaitLabel::QuasiStatic => "quasi_static",
        }
    }
}

impl From<traywalk_core::gait::GaitType> for GaitLabel {
    fn from(g: traywalk_core::gait::GaitType) -> Self {
        match g {
            traywalk_core::gait::GaitType::Trot => GaitLabel::Trot,
            traywalk_core::gait::GaitType::QuasiStatic => GaitLabel::QuasiStatic,
        }
    }
}

/// One footstep event (a leg entering swing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootholdRecord {
    pub t: f64,
    /// "FL", "FR", "BL", "BR".
    pub leg: LegLabel,
    pub planned: [f64; 2],
    /// Foothold actually executed.
    pub safe: [f64; 2],
    pub replanned: bool,
    pub used_fallback_edge: bool,
    /// Both pushout candidates violated the reach limit; the leg kept its
    /// previous stance location (stored in `safe`).
    pub unreachable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegLabel {
    FL,
    FR,
    BL,
    BR,
}

impl LegLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LegLabel::FL => "FL",
            LegLabel::FR => "FR",
            LegLabel::BL => "BL",
            LegLabel::BR => "BR",
        }
    }
}

impl From<traywalk_core::gait::Leg> for LegLabel {
    fn from(l: traywalk_core::gait::Leg) -> Self {
        match l {
            traywalk_core::gait::Leg::FL => LegLabel::FL,
            traywalk_core::gait::Leg::FR => LegLabel::FR,
            traywalk_core::gait::Leg::BL => LegLabel::BL,
            traywalk_core::gait::Leg::BR => LegLabel::BR,
        }
    }
}

/// One whole-body QP tick (dynamic plant only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WbcRecord {
    pub t: f64,
    pub base_x: f64,
    pub base_height: f64,
    pub dynamics_residual: f64,
    pub contact_residual: f64,
    pub normal_sum: f64,
    /// Contact forces, front then back.
    pub forces: Vec<[f64; 2]>,
    pub tau: [f64; 4],
    pub saturated: bool,
    pub qp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub final_pos: [f64; 2],
    /// Distance from the final position to the last waypoint.
    pub final_pos_error: f64,
    pub min_h_path: f64,
    pub min_h_gait: f64,
    pub gait_switch_times: Vec<f64>,
    pub replan_count: usize,
    pub unreachable_count: usize,
    /// First time each waypoint was reached within tolerance.
    pub waypoint_times: Vec<Option<f64>>,
    pub filter_deactivated_at: Option<f64>,
    pub ticks: usize,
    pub duration: f64,
    pub max_dynamics_residual: f64,
    pub max_contact_residual: f64,
    /// Worst |base height - nominal| over WBC ticks (dynamic plant).
    pub max_base_height_error: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// "kinematic" or "dynamic".
    pub plant: String,
    pub seed: u64,
    pub planner_dt: f64,
    pub ticks: Vec<TickRecord>,
    pub footholds: Vec<FootholdRecord>,
    pub wbc: Vec<WbcRecord>,
    pub errors: Vec<ErrorRecord>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn write_json(&self, path: &Path) -> Result<(), LogIoError> {
        let text = serde_json::to_string(self)?;
        write_file(path, text.as_bytes())
    }

    pub fn read_json(path: &Path) -> Result<Self, LogIoError> {
        let text = fs::read_to_string(path).map_err(|source| LogIoError::Read {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| LogIoError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), LogIoError> {
    let io_err = |source| LogIoError::Write { path: path.display().to_string(), source };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

fn push_fields(line: &mut String, fields: &[&dyn std::fmt::Display]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&f.to_string());
    }
    line.push('\n');
}

pub const BASE_CSV_HEADER: &str = "t,x,y,h_path,h_gait,nu_d_x,nu_d_y,nu_safe_x,nu_safe_y,\
filter_active,cbf_active,gait_selected,gait_active,phase,phase_boundary,gait_switched,\
waypoint_index";

pub const FOOTHOLD_CSV_HEADER: &str =
    "t,leg,planned_x,planned_y,safe_x,safe_y,replanned,used_fallback_edge,unreachable";

pub const WBC_CSV_HEADER: &str = "t,base_x,base_height,dynamics_residual,contact_residual,\
normal_sum,f_front_x,f_front_y,f_back_x,f_back_y,tau_fh,tau_fk,tau_bh,tau_bk,saturated,\
qp_iterations";

pub fn base_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(64 * (log.ticks.len() + 1));
    out.push_str(BASE_CSV_HEADER);
    out.push('\n');
    for r in &log.ticks {
        push_fields(
            &mut out,
            &[
                &r.t,
                &r.pos[0],
                &r.pos[1],
                &r.h_path,
                &r.h_gait,
                &r.nu_d[0],
                &r.nu_d[1],
                &r.nu_safe[0],
                &r.nu_safe[1],
                &r.filter_active,
                &r.cbf_active,
                &r.gait_selected.as_str(),
                &r.gait_active.as_str(),
                &r.phase,
                &r.phase_boundary,
                &r.gait_switched,
                &r.waypoint_index,
            ],
        );
    }
    out
}

pub fn foothold_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(48 * (log.footholds.len() + 1));
    out.push_str(FOOTHOLD_CSV_HEADER);
    out.push('\n');
    for r in &log.footholds {
        push_fields(
            &mut out,
            &[
                &r.t,
                &r.leg.as_str(),
                &r.planned[0],
                &r.planned[1],
                &r.safe[0],
                &r.safe[1],
                &r.replanned,
                &r.used_fallback_edge,
                &r.unreachable,
            ],
        );
    }
    out
}

pub fn wbc_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(96 * (log.wbc.len() + 1));
    out.push_str(WBC_CSV_HEADER);
    out.push('\n');
    for r in &log.wbc {
        let front = r.forces.first().copied().unwrap_or([f64::NAN, f64::NAN]);
        let back = r.forces.get(1).copied().unwrap_or([f64::NAN, f64::NAN]);
        push_fields(
            &mut out,
            &[
                &r.t,
                &r.base_x,
                &r.base_height,
                &r.dynamics_residual,
                &r.contact_residual,
                &r.normal_sum,
                &front[0],
                &front[1],
                &back[0],
                &back[1],
                &r.tau[0],
                &r.tau[1],
                &r.tau[2],
                &r.tau[3],
                &r.saturated,
                &r.qp_iterations,
            ],
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

/// Writes the plot-ready artifacts for a log into `dir` and returns the
/// paths written. `Csv` emits one file per signal group plus the summary;
/// `Json` emits the summary alone.
pub fn emit_outputs(log: &RunLog, dir: &Path, format: EmitFormat) -> Result<Vec<PathBuf>, LogIoError> {
    let mut written = Vec::new();
    let summary = serde_json::to_string_pretty(&log.summary)?;
    match format {
        EmitFormat::Csv => {
            let base = dir.join("base.csv");
            write_file(&base, base_csv(log).as_bytes())?;
            written.push(base);
            let feet = dir.join("footholds.csv");
            write_file(&feet, foothold_csv(log).as_bytes())?;
            written.push(feet);
            if !log.wbc.is_empty() {
                let wbc = dir.join("wbc.csv");
                write_file(&wbc, wbc_csv(log).as_bytes())?;
                written.push(wbc);
            }
        }
        EmitFormat::Json => {}
    }
    let summary_path = dir.join("summary.json");
    write_file(&summary_path, summary.as_bytes())?;
    written.push(summary_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_log() -> RunLog {
        RunLog {
            schema_version: LOG_SCHEMA_VERSION,
            scenario: Scenario::manway_crossing(),
            plant: "kinematic".into(),
            seed: 7,
            planner_dt: 0.01,
            ticks: vec![TickRecord {
                t: 0.0,
                pos: [0.0, 0.0],
                h_path: 5.0,
                h_gait: 0.25,
                nu_d: [0.05, 0.0],
                nu_safe: [0.05, 0.0],
                filter_active: true,
                cbf_active: false,
                gait_selected: GaitLabel::Trot,
                gait_active: GaitLabel::Trot,
                phase: 0,
                phase_boundary: false,
                gait_switched: false,
                waypoint_index: 0,
            }],
            footholds: vec![],
            wbc: vec![],
            errors: vec![],
            summary: RunSummary {
                schema_version: LOG_SCHEMA_VERSION,
                final_pos: [0.0, 0.0],
                final_pos_error: 0.9434,
                min_h_path: 5.0,
                min_h_gait: 0.25,
                gait_switch_times: vec![],
                replan_count: 0,
                unreachable_count: 0,
                waypoint_times: vec![None, None],
                filter_deactivated_at: None,
                ticks: 1,
                duration: 0.01,
                max_dynamics_residual: 0.0,
                max_contact_residual: 0.0,
                max_base_height_error: 0.0,
                aborted: false,
            },
        }
    }

    #[test]
    fn log_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.json");
        let log = tiny_log();
        log.write_json(&path).unwrap();
        let back = RunLog::read_json(&path).unwrap();
        assert_eq!(log, back);
    }

    #[test]
    fn csv_row_count_matches_ticks() {
        let log = tiny_log();
        let csv = base_csv(&log);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + log.ticks.len());
        assert_eq!(lines[0], BASE_CSV_HEADER);
        assert!(lines[1].starts_with("0,0,0,5,0.25,"));
    }

    #[test]
    fn emit_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let log = tiny_log();
        let files = emit_outputs(&log, dir.path(), EmitFormat::Csv).unwrap();
        let names: Vec<_> =
            files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["base.csv", "footholds.csv", "summary.json"]);
        for f in &files {
            assert!(f.exists());
        }
        let summary: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary, log.summary);
    }
}
