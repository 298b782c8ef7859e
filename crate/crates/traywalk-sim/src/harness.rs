//! Closed-loop scenario runner.
//!
//! Per planner tick: nominal waypoint controller → safety filter (while the
//! scripted flag is on) → gait selection from the gait barrier → footstep
//! targets and manway replanning at phase boundaries → plant update. Two
//! plants exist: "kinematic" integrates the filtered command directly;
//! "dynamic" runs the whole-body controller on the sagittal rigid body at
//! the QP rate with the impedance loop at the inner rate, and feeds the
//! achieved forward progress back into the ground-plane position.
//!
//! Runtime failures (filter infeasibility, controller infeasibility) are
//! recorded with timestamps and abort the run; the partial log is returned.

use traywalk_core::cbf::{filter_qp_with, h_value, FilterMode, FilterReport};
use traywalk_core::qp::{QpSettings, QpSolver};
use traywalk_core::foothold::{replan, FootholdQuery};
use traywalk_core::gait::{
    num_phases, phase_duration, raibert_footstep, select_gait, select_gait_raw, GaitState, Leg,
    PhaseTransition,
};
use traywalk_core::reduced::{step, step_kinematic, ReducedState};
use traywalk_core::rigid::{ContactSet, FullState, PlanarLeg, RobotModel, VecN};
use traywalk_core::wbc::{impedance_torque, WbcController};
use traywalk_core::Vec2;

use crate::logio::{
    ErrorRecord, FootholdRecord, RunLog, RunSummary, TickRecord, WbcRecord, LOG_SCHEMA_VERSION,
};
use crate::scenario::{vec2, ResolvedScenario, Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantMode {
    Kinematic,
    Dynamic,
}

impl PlantMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantMode::Kinematic => "kinematic",
            PlantMode::Dynamic => "dynamic",
        }
    }
}

impl std::str::FromStr for PlantMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kinematic" => Ok(PlantMode::Kinematic),
            "dynamic" => Ok(PlantMode::Dynamic),
            other => Err(format!("unknown plant mode {other:?}")),
        }
    }
}

fn arr(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

/// Runs a validated scenario to completion (or abort) and returns the log.
/// `seed` only labels the log; the loop itself is deterministic.
pub fn run_scenario(
    scenario: &Scenario,
    plant: PlantMode,
    seed: u64,
) -> Result<RunLog, ScenarioError> {
    let rs = scenario.resolve()?;
    let log = match plant {
        PlantMode::Kinematic => run_kinematic(scenario, &rs, seed),
        PlantMode::Dynamic => run_dynamic(scenario, &rs, seed),
    };
    Ok(log)
}

struct TickOutput {
    nu_safe: Vec2,
    phase_boundary: bool,
}

/// Ground-plane pipeline state shared by both plants.
struct GroundLoop<'a> {
    scenario: &'a Scenario,
    rs: &'a ResolvedScenario,
    state: ReducedState,
    wp_idx: usize,
    filter_on: bool,
    /// Warm-started across ticks; the active-boundary QP barely changes.
    filter_solver: QpSolver,
    filter_deactivated_at: Option<f64>,
    gait_state: GaitState,
    stance: [Vec2; 4],
    ticks: Vec<TickRecord>,
    footholds: Vec<FootholdRecord>,
    errors: Vec<ErrorRecord>,
    waypoint_times: Vec<Option<f64>>,
    gait_switch_times: Vec<f64>,
    replan_count: usize,
    unreachable_count: usize,
    aborted: bool,
}

impl<'a> GroundLoop<'a> {
    fn new(scenario: &'a Scenario, rs: &'a ResolvedScenario) -> Self {
        let start = vec2(scenario.waypoints.start);
        let h_g0 = h_value(&rs.gait_cbf, start);
        let mut stance = [Vec2::zeros(); 4];
        for leg in Leg::ALL {
            stance[leg.index()] = start + scenario.foothold.hip_offset(leg);
        }
        GroundLoop {
            scenario,
            rs,
            state: ReducedState::at_rest(start),
            wp_idx: 0,
            filter_on: scenario.safety.enabled,
            // check_interval 1: the 2-var barrier QP warm-starts one or two
            // iterations from convergence, so test every iteration.
            filter_solver: QpSolver::new(QpSettings {
                tol: rs.filter.qp_tol,
                max_iter: rs.filter.qp_max_iter,
                check_interval: 1,
                ..QpSettings::default()
            }),
            filter_deactivated_at: None,
            gait_state: GaitState::new(select_gait_raw(h_g0)),
            stance,
            ticks: Vec::with_capacity(rs.ticks),
            footholds: Vec::new(),
            errors: Vec::new(),
            waypoint_times: vec![None; scenario.waypoints.list.len()],
            gait_switch_times: Vec::new(),
            replan_count: 0,
            unreachable_count: 0,
            aborted: false,
        }
    }

    /// Plans one tick at time `t`: command, filter, gait, footsteps, record.
    /// Returns `None` when the safety filter is infeasible (run aborts).
    fn plan_tick(&mut self, t: f64, dt: f64) -> Option<TickOutput> {
        let target = vec2(self.scenario.waypoints.list[self.wp_idx]);
        let mut nu_d = self.scenario.planner.kp * (target - self.state.pos);
        let norm = nu_d.norm();
        if norm > self.scenario.planner.v_max {
            nu_d *= self.scenario.planner.v_max / norm;
        }

        let h_p = h_value(&self.rs.path_cbf, self.state.pos);
        let h_g = h_value(&self.rs.gait_cbf, self.state.pos);

        let (nu_safe, report) = if self.filter_on {
            match filter_qp_with(
                &mut self.filter_solver,
                &self.rs.path_cbf,
                &self.state,
                nu_d,
                &self.rs.filter,
            ) {
                Ok(out) => out,
                Err(e) => {
                    self.errors
                        .push(ErrorRecord { t, message: format!("safety filter failed: {e}") });
                    self.aborted = true;
                    return None;
                }
            }
        } else {
            (nu_d, FilterReport { active: false, qp_iterations: 0, kkt_max: 0.0 })
        };

        let gait_selected = select_gait_raw(h_g);
        let selected = select_gait(h_g, self.gait_state.active, &self.rs.gait);
        let transitions = self.gait_state.step(dt, selected, &self.rs.gait);
        let switched = transitions.iter().any(|tr| tr.switched_gait);
        if switched {
            self.gait_switch_times.push(t);
        }
        let vel_measured = match self.rs.filter.mode {
            FilterMode::Kinematic => nu_safe,
            FilterMode::Extended { .. } => self.state.vel,
        };
        for tr in &transitions {
            for &leg in tr.new_swing() {
                self.plan_foothold(t, leg, tr, vel_measured, nu_d);
            }
        }

        self.ticks.push(TickRecord {
            t,
            pos: arr(self.state.pos),
            h_path: h_p,
            h_gait: h_g,
            nu_d: arr(nu_d),
            nu_safe: arr(nu_safe),
            filter_active: self.filter_on,
            cbf_active: report.active,
            gait_selected: gait_selected.into(),
            gait_active: self.gait_state.active.into(),
            phase: self.gait_state.phase,
            phase_boundary: !transitions.is_empty(),
            gait_switched: switched,
            waypoint_index: self.wp_idx,
        });
        Some(TickOutput { nu_safe, phase_boundary: !transitions.is_empty() })
    }

    fn plan_foothold(
        &mut self,
        t: f64,
        leg: Leg,
        transition: &PhaseTransition,
        vel: Vec2,
        vel_cmd: Vec2,
    ) {
        let hip = self.state.pos + self.scenario.foothold.hip_offset(leg);
        let stance_duration = (num_phases(transition.gait) - 1) as f64
            * phase_duration(transition.gait, &self.rs.gait);
        let planned =
            raibert_footstep(hip, vel, vel_cmd, stance_duration, self.rs.gait.k_raibert);
        let query = FootholdQuery {
            foothold: planned,
            hip,
            reach: self.scenario.foothold.reach,
            epsilon: self.scenario.foothold.epsilon,
        };
        match replan(&self.rs.manway, &query) {
            Ok(res) => {
                if res.detail.is_some() {
                    self.replan_count += 1;
                }
                self.stance[leg.index()] = res.foothold;
                self.footholds.push(FootholdRecord {
                    t,
                    leg: leg.into(),
                    planned: arr(planned),
                    safe: arr(res.foothold),
                    replanned: res.detail.is_some(),
                    used_fallback_edge: res.detail.map_or(false, |d| d.used_fallback_edge),
                    unreachable: false,
                });
            }
            Err(e) => {
                self.unreachable_count += 1;
                self.errors.push(ErrorRecord {
                    t,
                    message: format!("foothold replan failed for {:?}: {e}", leg),
                });
                self.footholds.push(FootholdRecord {
                    t,
                    leg: leg.into(),
                    planned: arr(planned),
                    safe: arr(self.stance[leg.index()]),
                    replanned: false,
                    used_fallback_edge: false,
                    unreachable: true,
                });
            }
        }
    }

    /// Advances the reduced model by the filtered command (kinematic plant).
    fn advance_reduced(&mut self, nu: Vec2, dt: f64) {
        match self.rs.filter.mode {
            FilterMode::Kinematic => {
                self.state.pos = step_kinematic(self.state.pos, nu, dt);
                self.state.vel = nu;
            }
            FilterMode::Extended { .. } => {
                self.state = step(&self.state, nu, dt);
            }
        }
    }

    /// Waypoint bookkeeping after the plant update; `t_next` is the time the
    /// new position takes effect.
    fn after_step(&mut self, t_next: f64) {
        let target = vec2(self.scenario.waypoints.list[self.wp_idx]);
        if (self.state.pos - target).norm() <= self.scenario.waypoints.tolerance {
            if self.waypoint_times[self.wp_idx].is_none() {
                self.waypoint_times[self.wp_idx] = Some(t_next);
            }
            if self.scenario.waypoints.deactivate_filter_after == Some(self.wp_idx)
                && self.filter_on
            {
                self.filter_on = false;
                self.filter_deactivated_at = Some(t_next);
            }
            if self.wp_idx + 1 < self.scenario.waypoints.list.len() {
                self.wp_idx += 1;
            }
        }
    }

    fn into_log(
        self,
        plant: PlantMode,
        seed: u64,
        wbc: Vec<WbcRecord>,
        max_base_height_error: f64,
    ) -> RunLog {
        let last_wp = vec2(*self.scenario.waypoints.list.last().expect("validated nonempty"));
        let min_h_path = self.ticks.iter().map(|r| r.h_path).fold(f64::INFINITY, f64::min);
        let min_h_gait = self.ticks.iter().map(|r| r.h_gait).fold(f64::INFINITY, f64::min);
        let max_dyn = wbc.iter().map(|r| r.dynamics_residual).fold(0.0, f64::max);
        let max_con = wbc.iter().map(|r| r.contact_residual).fold(0.0, f64::max);
        let summary = RunSummary {
            schema_version: LOG_SCHEMA_VERSION,
            final_pos: arr(self.state.pos),
            final_pos_error: (self.state.pos - last_wp).norm(),
            min_h_path,
            min_h_gait,
            gait_switch_times: self.gait_switch_times,
            replan_count: self.replan_count,
            unreachable_count: self.unreachable_count,
            waypoint_times: self.waypoint_times,
            filter_deactivated_at: self.filter_deactivated_at,
            ticks: self.ticks.len(),
            duration: self.ticks.len() as f64 * self.rs.planner_dt,
            max_dynamics_residual: max_dyn,
            max_contact_residual: max_con,
            max_base_height_error,
            aborted: self.aborted,
        };
        RunLog {
            schema_version: LOG_SCHEMA_VERSION,
            scenario: self.scenario.clone(),
            plant: plant.as_str().into(),
            seed,
            planner_dt: self.rs.planner_dt,
            ticks: self.ticks,
            footholds: self.footholds,
            wbc,
            errors: self.errors,
            summary,
        }
    }
}

fn run_kinematic(scenario: &Scenario, rs: &ResolvedScenario, seed: u64) -> RunLog {
    let dt = rs.planner_dt;
    let mut world = GroundLoop::new(scenario, rs);
    for k in 0..rs.ticks {
        let t = k as f64 * dt;
        let Some(out) = world.plan_tick(t, dt) else { break };
        world.advance_reduced(out.nu_safe, dt);
        world.after_step(t + dt);
    }
    world.into_log(PlantMode::Kinematic, seed, Vec::new(), 0.0)
}

fn run_dynamic(scenario: &Scenario, rs: &ResolvedScenario, seed: u64) -> RunLog {
    let dt = rs.planner_dt;
    let qp_dt = dt / rs.qp_per_planner as f64;
    let imp_dt = qp_dt / rs.imp_per_qp as f64;
    let model = RobotModel::new(rs.model);
    let height = rs.model.standing_height;
    let q0 = model.standing_config(0.0, height);
    let mut plant = FullState::new(q0, VecN::zeros());
    let mut ctrl = WbcController::new(rs.gains);
    let contacts = ContactSet::both();
    let mut anchors = vec![
        model.foot_position(&q0, PlanarLeg::Front),
        model.foot_position(&q0, PlanarLeg::Back),
    ];
    // Sagittal reference: the base tracks the arc length of the filtered
    // ground-plane command; stance feet re-anchor under the reference hips
    // at every phase boundary.
    let mut x_target = 0.0;
    let mut heading = Vec2::new(1.0, 0.0);
    let mut world = GroundLoop::new(scenario, rs);
    let mut wbc_records = Vec::with_capacity(rs.ticks * rs.qp_per_planner);
    let mut max_height_err = 0.0f64;

    'ticks: for k in 0..rs.ticks {
        let t = k as f64 * dt;
        let Some(out) = world.plan_tick(t, dt) else { break };
        let speed = out.nu_safe.norm();
        if speed > 1e-12 {
            heading = out.nu_safe / speed;
        }
        if out.phase_boundary {
            anchors[0] = Vec2::new(x_target + rs.model.hip_offset_x, 0.0);
            anchors[1] = Vec2::new(x_target - rs.model.hip_offset_x, 0.0);
        }
        x_target += speed * dt;

        let mut q_d = VecN::zeros();
        q_d[0] = x_target;
        q_d[1] = height;
        for (i, leg) in PlanarLeg::ALL.into_iter().enumerate() {
            let sol = model.leg_ik(&q_d, anchors[i], leg, -1.0);
            let (ih, ik) = leg.joint_indices();
            q_d[ih] = sol.hip;
            q_d[ik] = sol.knee;
        }
        let mut qd_d = VecN::zeros();
        qd_d[0] = speed;

        let x_before = plant.q[0];
        let mut qp_ticks = 0;
        for j in 0..rs.qp_per_planner {
            let tq = t + j as f64 * qp_dt;
            let cmd = match ctrl.tick(&model, &plant, &contacts, &anchors, &q_d, &qd_d, qp_dt) {
                Ok(cmd) => cmd,
                Err(e) => {
                    world.errors.push(ErrorRecord {
                        t: tq,
                        message: format!("whole-body controller failed: {e}"),
                    });
                    world.aborted = true;
                    break 'ticks;
                }
            };
            max_height_err = max_height_err.max((plant.q[1] - height).abs());
            wbc_records.push(WbcRecord {
                t: tq,
                base_x: plant.q[0],
                base_height: plant.q[1],
                dynamics_residual: cmd.dynamics_residual,
                contact_residual: cmd.contact_residual,
                normal_sum: cmd.f_c_star.iter().map(|f| f.y).sum(),
                forces: cmd.f_c_star.iter().map(|f| [f.x, f.y]).collect(),
                tau: [cmd.tau_star[0], cmd.tau_star[1], cmd.tau_star[2], cmd.tau_star[3]],
                saturated: cmd.saturated,
                qp_iterations: cmd.qp_iterations,
            });
            for _ in 0..rs.imp_per_qp {
                let (tau_cmd, _) = impedance_torque(
                    &cmd.tau_star,
                    &cmd.q_n,
                    &cmd.qd_n,
                    &plant.q,
                    &plant.qd,
                    &ctrl.gains,
                    rs.model.torque_limit,
                );
                let qdd = model.forward_dynamics(&plant.q, &plant.qd, &tau_cmd, &contacts, &cmd.f_c_star);
                plant.qd += qdd * imp_dt;
                plant.q += plant.qd * imp_dt;
            }
            qp_ticks += 1;
        }
        assert_eq!(qp_ticks, rs.qp_per_planner, "layered-rate contract violated");

        let dx = plant.q[0] - x_before;
        world.state.pos += heading * dx;
        world.state.vel = heading * (dx / dt);
        world.after_step(t + dt);
    }
    world.into_log(PlantMode::Dynamic, seed, wbc_records, max_height_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hold_scenario_stays_put_without_replans() {
        let s = Scenario::standing_hold(2.0);
        let log = run_scenario(&s, PlantMode::Kinematic, 0).unwrap();
        assert!(!log.summary.aborted);
        assert_eq!(log.summary.ticks, 200);
        assert_eq!(log.summary.replan_count, 0);
        assert_relative_eq!(log.summary.final_pos[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(log.summary.final_pos[1], 0.0, epsilon = 1e-12);
        assert!(log.footholds.iter().all(|f| !f.replanned));
        // One footstep event per boundary leg, trot cadence.
        assert!(log.footholds.len() > 10);
    }

    #[test]
    fn crossing_scenario_reaches_waypoints_and_deactivates_filter() {
        let s = Scenario::manway_crossing();
        let log = run_scenario(&s, PlantMode::Kinematic, 0).unwrap();
        assert!(!log.summary.aborted, "errors: {:?}", log.errors);
        let times = &log.summary.waypoint_times;
        assert!(times[0].is_some(), "intermediate waypoint not reached");
        assert!(times[1].is_some(), "goal not reached");
        assert!(times[0].unwrap() < times[1].unwrap());
        assert_eq!(log.summary.filter_deactivated_at, times[0]);
        assert!(log.summary.final_pos_error <= s.waypoints.tolerance);
        // Safe while the filter runs; afterwards the base crosses the
        // opening on purpose and the barrier goes deeply negative.
        let min_filtered = log
            .ticks
            .iter()
            .filter(|r| r.filter_active)
            .map(|r| r.h_path)
            .fold(f64::INFINITY, f64::min);
        assert!(min_filtered >= -1e-6, "min filtered h_path {min_filtered}");
        assert!(log.summary.min_h_path < -0.9);
        // The route skirts the opening, so some footholds must be replanned.
        assert!(log.summary.replan_count > 0);
        assert_eq!(log.summary.unreachable_count, 0);
    }

    #[test]
    fn gait_switches_only_at_phase_boundaries() {
        let s = Scenario::manway_crossing();
        let log = run_scenario(&s, PlantMode::Kinematic, 0).unwrap();
        let mut switches = 0;
        for pair in log.ticks.windows(2) {
            if pair[1].gait_active != pair[0].gait_active {
                assert!(pair[1].phase_boundary && pair[1].gait_switched);
                switches += 1;
            }
        }
        assert!(switches >= 1, "expected at least one gait switch");
        assert_eq!(log.summary.gait_switch_times.len(), switches);
    }

    #[test]
    fn tick_timestamps_are_uniform() {
        let s = Scenario::standing_hold(1.0);
        let log = run_scenario(&s, PlantMode::Kinematic, 3).unwrap();
        for (k, r) in log.ticks.iter().enumerate() {
            assert_relative_eq!(r.t, k as f64 * log.planner_dt, epsilon = 1e-12);
        }
    }

    #[test]
    fn dynamic_hold_tracks_height_and_rates() {
        let mut s = Scenario::standing_hold(1.0);
        s.planner.duration = 1.0;
        let log = run_scenario(&s, PlantMode::Dynamic, 0).unwrap();
        assert!(!log.summary.aborted, "errors: {:?}", log.errors);
        assert_eq!(log.wbc.len(), log.ticks.len() * 10);
        assert!(log.summary.max_base_height_error < 5e-3,
            "height error {}", log.summary.max_base_height_error);
        assert!(log.summary.max_dynamics_residual <= 1e-6);
        assert!(log.summary.max_contact_residual <= 1e-6);
    }
}
