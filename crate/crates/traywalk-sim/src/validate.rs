//! Post-hoc log validation.
//!
//! The validator rebuilds every safety claim from raw recorded positions
//! and the scenario embedded in the log; it shares no state with the
//! controller. In particular the required-filter window is derived from the
//! waypoint script (filter mandatory until the scripted deactivation
//! waypoint is first reached), not from the controller's own flags, so an
//! ablation run with the filter switched off is still caught.

use traywalk_core::cbf::h_value;
use traywalk_core::geometry::hull_contains;
use traywalk_core::Vec2;

use crate::logio::RunLog;
use crate::scenario::vec2;

pub const H_PATH_FLOOR: f64 = -1e-6;
pub const H_RECOMPUTE_TOL: f64 = 1e-9;
pub const SUMMARY_CROSS_TOL: f64 = 1e-12;
pub const WBC_RESIDUAL_BOUND: f64 = 1e-6;
pub const NORMAL_FORCE_FLOOR: f64 = -1e-8;
pub const FRICTION_SLACK: f64 = 1e-8;
pub const TORQUE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ScenarioInvalid,
    SchemaVersion,
    BarrierMismatch,
    PathBarrierViolated,
    UnsafeFoothold,
    DynamicsResidual,
    ContactResidual,
    NormalForce,
    FrictionCone,
    TorqueBound,
    SummaryMismatch,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::ScenarioInvalid => "scenario_invalid",
            ViolationKind::SchemaVersion => "schema_version",
            ViolationKind::BarrierMismatch => "barrier_mismatch",
            ViolationKind::PathBarrierViolated => "path_barrier_violated",
            ViolationKind::UnsafeFoothold => "unsafe_foothold",
            ViolationKind::DynamicsResidual => "dynamics_residual",
            ViolationKind::ContactResidual => "contact_residual",
            ViolationKind::NormalForce => "normal_force",
            ViolationKind::FrictionCone => "friction_cone",
            ViolationKind::TorqueBound => "torque_bound",
            ViolationKind::SummaryMismatch => "summary_mismatch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub ticks_checked: usize,
    pub footholds_checked: usize,
    pub wbc_checked: usize,
    /// min h_path recomputed from raw positions.
    pub min_h_path: f64,
    pub min_h_gait: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "checked {} ticks, {} footholds, {} wbc ticks; min h_path = {:.6e}; {} violation(s)",
            self.ticks_checked,
            self.footholds_checked,
            self.wbc_checked,
            self.min_h_path,
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(f, "  [t={:.4}] {}: {}", v.t, v.kind.as_str(), v.detail)?;
        }
        Ok(())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a.to_bits() == b.to_bits() || (a - b).abs() <= tol
}

pub fn validate_log(log: &RunLog) -> ValidationReport {
    let mut violations = Vec::new();
    let rs = match log.scenario.resolve() {
        Ok(rs) => rs,
        Err(e) => {
            return ValidationReport {
                violations: vec![Violation {
                    t: 0.0,
                    kind: ViolationKind::ScenarioInvalid,
                    detail: e.to_string(),
                }],
                ticks_checked: 0,
                footholds_checked: 0,
                wbc_checked: 0,
                min_h_path: f64::INFINITY,
                min_h_gait: f64::INFINITY,
            }
        }
    };

    if log.schema_version != crate::logio::LOG_SCHEMA_VERSION {
        violations.push(Violation {
            t: 0.0,
            kind: ViolationKind::SchemaVersion,
            detail: format!(
                "log schema {} != supported {}",
                log.schema_version,
                crate::logio::LOG_SCHEMA_VERSION
            ),
        });
    }

    // Pass over the ticks: recompute barriers, track the scripted
    // deactivation waypoint from raw positions.
    let mut min_h_path = f64::INFINITY;
    let mut min_h_gait = f64::INFINITY;
    let mut wp_idx = 0usize;
    let mut filter_required = true;
    let waypoints = &log.scenario.waypoints;
    for tick in &log.ticks {
        let pos = Vec2::new(tick.pos[0], tick.pos[1]);
        // Waypoint bookkeeping first: the tick that reaches the scripted
        // waypoint is the first allowed to run unfiltered.
        if (pos - vec2(waypoints.list[wp_idx])).norm() <= waypoints.tolerance {
            if waypoints.deactivate_filter_after == Some(wp_idx) {
                filter_required = false;
            }
            if wp_idx + 1 < waypoints.list.len() {
                wp_idx += 1;
            }
        }

        let h_p = h_value(&rs.path_cbf, pos);
        let h_g = h_value(&rs.gait_cbf, pos);
        min_h_path = min_h_path.min(h_p);
        min_h_gait = min_h_gait.min(h_g);
        if !close(h_p, tick.h_path, H_RECOMPUTE_TOL) {
            violations.push(Violation {
                t: tick.t,
                kind: ViolationKind::BarrierMismatch,
                detail: format!("recorded h_path {} != recomputed {}", tick.h_path, h_p),
            });
        }
        if !close(h_g, tick.h_gait, H_RECOMPUTE_TOL) {
            violations.push(Violation {
                t: tick.t,
                kind: ViolationKind::BarrierMismatch,
                detail: format!("recorded h_gait {} != recomputed {}", tick.h_gait, h_g),
            });
        }
        if filter_required && h_p < H_PATH_FLOOR {
            violations.push(Violation {
                t: tick.t,
                kind: ViolationKind::PathBarrierViolated,
                detail: format!("h_path = {h_p} below {H_PATH_FLOOR} while the filter is required"),
            });
        }
    }

    for fh in &log.footholds {
        let safe = Vec2::new(fh.safe[0], fh.safe[1]);
        if hull_contains(&rs.manway, safe) {
            violations.push(Violation {
                t: fh.t,
                kind: ViolationKind::UnsafeFoothold,
                detail: format!(
                    "{} executed foothold ({}, {}) lies inside the manway",
                    fh.leg.as_str(),
                    safe.x,
                    safe.y
                ),
            });
        }
    }

    let mu = log.scenario.model.friction_mu;
    let tau_max = log.scenario.model.torque_limit;
    for w in &log.wbc {
        if w.dynamics_residual > WBC_RESIDUAL_BOUND {
            violations.push(Violation {
                t: w.t,
                kind: ViolationKind::DynamicsResidual,
                detail: format!("dynamics residual {} > {}", w.dynamics_residual, WBC_RESIDUAL_BOUND),
            });
        }
        if w.contact_residual > WBC_RESIDUAL_BOUND {
            violations.push(Violation {
                t: w.t,
                kind: ViolationKind::ContactResidual,
                detail: format!("contact residual {} > {}", w.contact_residual, WBC_RESIDUAL_BOUND),
            });
        }
        for (i, f) in w.forces.iter().enumerate() {
            if f[1] < NORMAL_FORCE_FLOOR {
                violations.push(Violation {
                    t: w.t,
                    kind: ViolationKind::NormalForce,
                    detail: format!("contact {i} normal force {} < 0", f[1]),
                });
            }
            if f[0].abs() > mu * f[1] + FRICTION_SLACK {
                violations.push(Violation {
                    t: w.t,
                    kind: ViolationKind::FrictionCone,
                    detail: format!("contact {i} |Ft| = {} exceeds mu Fn = {}", f[0].abs(), mu * f[1]),
                });
            }
        }
        for (j, tau) in w.tau.iter().enumerate() {
            if tau.abs() > tau_max + TORQUE_SLACK {
                violations.push(Violation {
                    t: w.t,
                    kind: ViolationKind::TorqueBound,
                    detail: format!("joint {j} torque {} exceeds limit {}", tau, tau_max),
                });
            }
        }
    }

    if !close(log.summary.min_h_path, min_h_path, SUMMARY_CROSS_TOL) {
        violations.push(Violation {
            t: 0.0,
            kind: ViolationKind::SummaryMismatch,
            detail: format!(
                "summary min_h_path {} != recomputed {}",
                log.summary.min_h_path, min_h_path
            ),
        });
    }
    if !close(log.summary.min_h_gait, min_h_gait, SUMMARY_CROSS_TOL) {
        violations.push(Violation {
            t: 0.0,
            kind: ViolationKind::SummaryMismatch,
            detail: format!(
                "summary min_h_gait {} != recomputed {}",
                log.summary.min_h_gait, min_h_gait
            ),
        });
    }
    if log.summary.ticks != log.ticks.len() {
        violations.push(Violation {
            t: 0.0,
            kind: ViolationKind::SummaryMismatch,
            detail: format!("summary ticks {} != series length {}", log.summary.ticks, log.ticks.len()),
        });
    }

    ValidationReport {
        violations,
        ticks_checked: log.ticks.len(),
        footholds_checked: log.footholds.len(),
        wbc_checked: log.wbc.len(),
        min_h_path,
        min_h_gait,
    }
}
