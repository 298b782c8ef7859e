//! Whole-body controller: one QP per control tick maps a desired joint
//! acceleration to a consistent triple (qdd*, tau*, F_c*), followed by
//! smoothed Euler integration of the optimum and an impedance torque law
//! for the high-rate inner loop.
//!
//! Decision vector z = [qdd (7), tau (4), F_c (2 per stance foot)].
//!
//! ```text
//!   minimize   (qdd_d - qdd)' W_qdd (qdd_d - qdd) + tau' W_u tau
//!   subject to D qdd - S' tau - J_c' F = -H          (dynamics)
//!              J_c qdd = -Jdot qd - 2 zeta w J_c qd - w^2 e   (contact)
//!              F_n >= 0, |F_t| <= mu F_n             (friction pyramid)
//!              |tau| <= tau_max
//! ```
//!
//! The contact rows hold the stance feet at their touchdown anchors with
//! critically damped stabilization; plain acceleration-level enforcement
//! drifts under integration.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::geometry::Vec2;
use crate::qp::{QpProblem, QpSolver, QpSettings, QpStatus};
use crate::rigid::{ContactSet, FullState, RobotModel, VecN, VecU, NQ, NU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbcGains {
    /// PD gains mapping tracking error to desired acceleration.
    pub kp: VecN,
    pub kd: VecN,
    /// Impedance gains of the high-rate torque law (actuated joints).
    pub kp_imp: VecU,
    pub kd_imp: VecU,
    /// Diagonal acceleration tracking weight.
    pub w_qdd: VecN,
    /// Diagonal torque effort weight (zero allowed).
    pub w_u: VecU,
    /// Integration smoothing factor in [0, 1].
    pub gamma: f64,
    /// Contact stabilization frequency (rad/s) and damping ratio.
    pub baumgarte_omega: f64,
    pub baumgarte_zeta: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for WbcGains {
    fn default() -> Self {
        WbcGains {
            kp: VecN::from_row_slice(&[40.0, 40.0, 60.0, 100.0, 100.0, 100.0, 100.0]),
            kd: VecN::from_row_slice(&[12.0, 12.0, 15.0, 10.0, 10.0, 10.0, 10.0]),
            kp_imp: VecU::from_element(20.0),
            kd_imp: VecU::from_element(0.5),
            w_qdd: VecN::from_element(1.0),
            w_u: VecU::from_element(0.0),
            gamma: 0.5,
            baumgarte_omega: 50.0,
            baumgarte_zeta: 1.0,
            qp_tol: 1e-8,
            qp_max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WbcError {
    /// QP did not reach a verified optimum (torque limits too tight for
    /// gravity support, contact rows inconsistent, iteration cap, ...).
    ControllerInfeasible { status: QpStatus, kkt_max: f64 },
    NoStanceFeet,
    BadGains { reason: &'static str },
}

impl core::fmt::Display for WbcError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            WbcError::ControllerInfeasible { status, kkt_max } => {
                write!(f, "controller QP infeasible: {status:?}, worst residual {kkt_max:.3e}")
            }
            WbcError::NoStanceFeet => write!(f, "whole-body QP needs at least one stance foot"),
            WbcError::BadGains { reason } => write!(f, "invalid controller gains: {reason}"),
        }
    }
}

impl core::error::Error for WbcError {}

impl WbcGains {
    pub fn validate(&self) -> Result<(), WbcError> {
        let nonneg = self.kp.iter().chain(self.kd.iter()).chain(self.w_qdd.iter()).all(|&g| g >= 0.0)
            && self.kp_imp.iter().chain(self.kd_imp.iter()).chain(self.w_u.iter()).all(|&g| g >= 0.0);
        if !nonneg {
            return Err(WbcError::BadGains { reason: "gains and weights must be non-negative" });
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(WbcError::BadGains { reason: "gamma must lie in [0, 1]" });
        }
        if self.w_qdd.iter().skip(3).any(|&w| w <= 0.0) {
            return Err(WbcError::BadGains {
                reason: "acceleration weight must be positive on actuated coordinates",
            });
        }
        Ok(())
    }
}

/// PD law producing the acceleration target the QP tracks.
pub fn desired_accel(q: &VecN, qd: &VecN, q_d: &VecN, qd_d: &VecN, gains: &WbcGains) -> VecN {
    VecN::from_fn(|i, _| gains.kp[i] * (q_d[i] - q[i]) + gains.kd[i] * (qd_d[i] - qd[i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WbcSolution {
    pub qdd_star: VecN,
    pub tau_star: VecU,
    /// Contact forces per stance foot, front first.
    pub f_c_star: Vec<Vec2>,
    pub qp_iterations: usize,
    pub kkt_max: f64,
    /// Independently recomputed constraint residuals (infinity norms).
    pub dynamics_residual: f64,
    pub contact_residual: f64,
}

impl WbcSolution {
    pub fn normal_force_sum(&self) -> f64 {
        self.f_c_star.iter().map(|f| f.y).sum()
    }
}

/// Solves the control QP at one tick. `anchors` are the world positions
/// the stance feet should hold, ordered like `contacts.active()`.
pub fn solve_wbc(
    model: &RobotModel,
    state: &FullState,
    contacts: &ContactSet,
    anchors: &[Vec2],
    qdd_desired: &VecN,
    gains: &WbcGains,
    solver: &mut QpSolver,
) -> Result<WbcSolution, WbcError> {
    if contacts.count() == 0 {
        return Err(WbcError::NoStanceFeet);
    }
    debug_assert_eq!(anchors.len(), contacts.count());
    gains.validate()?;

    let nc2 = 2 * contacts.count();
    let nv = NQ + NU + nc2;
    let d = model.mass_matrix(&state.q);
    let h = model.bias_forces(&state.q, &state.qd);
    let cj = model.contact_jacobian(&state.q, &state.qd, contacts);

    let mut p = DMatrix::zeros(nv, nv);
    let mut lin = DVector::zeros(nv);
    for i in 0..NQ {
        p[(i, i)] = 2.0 * gains.w_qdd[i];
        lin[i] = -2.0 * gains.w_qdd[i] * qdd_desired[i];
    }
    for k in 0..NU {
        p[(NQ + k, NQ + k)] = 2.0 * gains.w_u[k];
    }

    let ne = NQ + nc2;
    let mut a_eq = DMatrix::zeros(ne, nv);
    let mut b_eq = DVector::zeros(ne);
    // Dynamics rows: D qdd - S' tau - J_c' F = -H.
    a_eq.view_mut((0, 0), (NQ, NQ)).copy_from(&d);
    for k in 0..NU {
        a_eq[(3 + k, NQ + k)] = -1.0;
    }
    for row in 0..NQ {
        for col in 0..nc2 {
            a_eq[(row, NQ + NU + col)] = -cj.j[(col, row)];
        }
    }
    for i in 0..NQ {
        b_eq[i] = -h[i];
    }
    // Contact rows with critically damped stabilization toward anchors.
    let omega = gains.baumgarte_omega;
    let zeta = gains.baumgarte_zeta;
    let jqd = &cj.j * {
        let mut v = DVector::zeros(NQ);
        for i in 0..NQ {
            v[i] = state.qd[i];
        }
        v
    };
    for (k, leg) in contacts.active().enumerate() {
        let foot = model.foot_position(&state.q, leg);
        let err = foot - anchors[k];
        for axis in 0..2 {
            let r = 2 * k + axis;
            for col in 0..NQ {
                a_eq[(NQ + r, col)] = cj.j[(r, col)];
            }
            b_eq[NQ + r] =
                -cj.jdot_qdot[r] - 2.0 * zeta * omega * jqd[r] - omega * omega * err[axis];
        }
    }

    // Friction pyramid: -F_n <= 0, F_t - mu F_n <= 0, -F_t - mu F_n <= 0.
    let mu = model.params.friction_mu;
    let mut g = DMatrix::zeros(3 * contacts.count(), nv);
    let h_ineq = DVector::zeros(3 * contacts.count());
    for k in 0..contacts.count() {
        let ft = NQ + NU + 2 * k;
        let fn_ = ft + 1;
        g[(3 * k, fn_)] = -1.0;
        g[(3 * k + 1, ft)] = 1.0;
        g[(3 * k + 1, fn_)] = -mu;
        g[(3 * k + 2, ft)] = -1.0;
        g[(3 * k + 2, fn_)] = -mu;
    }

    let mut lb = DVector::from_element(nv, f64::NEG_INFINITY);
    let mut ub = DVector::<f64>::from_element(nv, f64::INFINITY);
    for k in 0..NU {
        lb[NQ + k] = -model.params.torque_limit;
        ub[NQ + k] = model.params.torque_limit;
    }

    let mut problem = QpProblem::new(p, lin);
    problem.a_eq = a_eq;
    problem.b_eq = b_eq;
    problem.g = g;
    problem.h = h_ineq;
    problem.lb = Some(lb);
    problem.ub = Some(ub);
    solver.settings.tol = gains.qp_tol;
    solver.settings.max_iter = gains.qp_max_iter;
    let sol = solver.solve(&problem).map_err(|_| WbcError::ControllerInfeasible {
        status: QpStatus::MaxIterations,
        kkt_max: f64::INFINITY,
    })?;
    if sol.status != QpStatus::Solved {
        return Err(WbcError::ControllerInfeasible { status: sol.status, kkt_max: sol.kkt.max() });
    }

    let qdd_star = VecN::from_fn(|i, _| sol.z[i]);
    let tau_star = VecU::from_fn(|k, _| sol.z[NQ + k]);
    let f_c_star: Vec<Vec2> = (0..contacts.count())
        .map(|k| Vec2::new(sol.z[NQ + NU + 2 * k], sol.z[NQ + NU + 2 * k + 1]))
        .collect();

    // Residuals recomputed from the model, not taken from the QP.
    let mut dyn_res = d * qdd_star + h;
    for k in 0..NU {
        dyn_res[3 + k] -= tau_star[k];
    }
    for (k, f) in f_c_star.iter().enumerate() {
        for col in 0..NQ {
            dyn_res[col] -= cj.j[(2 * k, col)] * f.x + cj.j[(2 * k + 1, col)] * f.y;
        }
    }
    let mut contact_res: f64 = 0.0;
    for r in 0..nc2 {
        let mut lhs = 0.0;
        for col in 0..NQ {
            lhs += cj.j[(r, col)] * qdd_star[col];
        }
        contact_res = contact_res.max((lhs - problem.b_eq[NQ + r]).abs());
    }

    Ok(WbcSolution {
        qdd_star,
        tau_star,
        f_c_star,
        qp_iterations: sol.iterations,
        kkt_max: sol.kkt.max(),
        dynamics_residual: dyn_res.amax(),
        contact_residual: contact_res,
    })
}

/// Smoothed Euler integration of the optimal acceleration:
///
/// ```text
///   qd_n = (1-gamma) qd + gamma qd_n_prev + dt qdd*
///   q_n  = q + dt ((1-gamma) qd + gamma qd_n_prev) + dt^2/2 qdd*
/// ```
pub fn integrate_desired(
    q: &VecN,
    qd: &VecN,
    qdd_star: &VecN,
    qd_n_prev: &VecN,
    gamma: f64,
    dt: f64,
) -> (VecN, VecN) {
    let blend = (1.0 - gamma) * qd + gamma * qd_n_prev;
    let qd_n = blend + dt * qdd_star;
    let q_n = q + dt * blend + 0.5 * dt * dt * qdd_star;
    (q_n, qd_n)
}

/// High-rate impedance torque around the QP solution, saturated to the
/// actuator limits with a flag.
pub fn impedance_torque(
    tau_star: &VecU,
    q_n: &VecN,
    qd_n: &VecN,
    q: &VecN,
    qd: &VecN,
    gains: &WbcGains,
    tau_limit: f64,
) -> (VecU, bool) {
    let mut saturated = false;
    let tau = VecU::from_fn(|k, _| {
        let j = 3 + k;
        let raw = tau_star[k]
            + gains.kp_imp[k] * (q_n[j] - q[j])
            + gains.kd_imp[k] * (qd_n[j] - qd[j]);
        if raw.abs() > tau_limit {
            saturated = true;
            raw.clamp(-tau_limit, tau_limit)
        } else {
            raw
        }
    });
    (tau, saturated)
}

/// Full per-tick output of the stateful controller.
#[derive(Debug, Clone, PartialEq)]
pub struct WbcCommand {
    pub qdd_star: VecN,
    pub tau_star: VecU,
    pub f_c_star: Vec<Vec2>,
    pub q_n: VecN,
    pub qd_n: VecN,
    pub tau_cmd: VecU,
    pub saturated: bool,
    pub dynamics_residual: f64,
    pub contact_residual: f64,
    pub qp_iterations: usize,
}

/// Sequential controller owning the smoothing state and a warm-started QP.
#[derive(Debug, Clone)]
pub struct WbcController {
    pub gains: WbcGains,
    qd_n_prev: Option<VecN>,
    solver: QpSolver,
}

impl WbcController {
    pub fn new(gains: WbcGains) -> Self {
        let settings = QpSettings {
            tol: gains.qp_tol,
            max_iter: gains.qp_max_iter,
            ..QpSettings::default()
        };
        WbcController { gains, qd_n_prev: None, solver: QpSolver::new(settings) }
    }

    pub fn reset(&mut self) {
        self.qd_n_prev = None;
        self.solver.reset();
    }

    /// One 1 kHz tick: QP solve, smoothing integration, impedance torque.
    /// The returned command holds between QP ticks; the 8 kHz inner loop
    /// re-evaluates [`impedance_torque`] against fresh measurements.
    pub fn tick(
        &mut self,
        model: &RobotModel,
        state: &FullState,
        contacts: &ContactSet,
        anchors: &[Vec2],
        q_d: &VecN,
        qd_d: &VecN,
        dt: f64,
    ) -> Result<WbcCommand, WbcError> {
        let qdd_d = desired_accel(&state.q, &state.qd, q_d, qd_d, &self.gains);
        let sol = solve_wbc(model, state, contacts, anchors, &qdd_d, &self.gains, &mut self.solver)?;
        let qd_n_prev = self.qd_n_prev.unwrap_or(state.qd);
        let (q_n, qd_n) =
            integrate_desired(&state.q, &state.qd, &sol.qdd_star, &qd_n_prev, self.gains.gamma, dt);
        self.qd_n_prev = Some(qd_n);
        let (tau_cmd, saturated) = impedance_torque(
            &sol.tau_star,
            &q_n,
            &qd_n,
            &state.q,
            &state.qd,
            &self.gains,
            model.params.torque_limit,
        );
        Ok(WbcCommand {
            qdd_star: sol.qdd_star,
            tau_star: sol.tau_star,
            f_c_star: sol.f_c_star,
            q_n,
            qd_n,
            tau_cmd,
            saturated,
            dynamics_residual: sol.dynamics_residual,
            contact_residual: sol.contact_residual,
            qp_iterations: sol.qp_iterations,
        })
    }
}
