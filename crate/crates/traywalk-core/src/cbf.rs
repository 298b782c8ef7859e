//! Control barrier function safety filter over ellipse barriers.
//!
//! An ellipse with center `xc`, semi-axes `a >= 0`, `b` and orientation
//! `theta` induces the barrier
//!
//! ```text
//!   h(x) = x' A x + B x + c,
//!   A = R(theta) diag(1/a^2, 1/b^2) R(theta)',
//!   B = -2 xc' A,   c = xc' A xc - 1,
//! ```
//!
//! so `h(x) = (x - xc)' A (x - xc) - 1`: negative inside the ellipse, zero on
//! it, positive outside. The safe set is the 0-superlevel set (the outside).
//!
//! The filter solves `min || nu - nu_d ||^2` subject to the barrier row
//! `grad_h(x)' nu >= -alpha(h(x))` (kinematic reading: `nu` is a velocity
//! command) plus optional input bounds. Two independent routes exist on
//! purpose: [`filter_qp`] goes through the generic QP solver, and
//! [`filter_closed_form`] is the analytic single-constraint projection used
//! to cross-check it. They must agree to solver precision on unbounded
//! problems; do not collapse one into the other.

#[allow(unused_imports)] // inherent f64 methods shadow the shim in std builds
use crate::math::FloatExt as _;

use crate::geometry::{rotation, Ellipse, Mat2, Vec2};
use crate::qp::{QpError, QpProblem, QpSettings, QpSolver, QpStatus};
use crate::reduced::ReducedState;
use nalgebra::{DMatrix, DVector};

/// Quadratic barrier induced by an ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseCbf {
    pub a_mat: Mat2,
    pub b_vec: Vec2,
    pub c: f64,
    pub ellipse: Ellipse,
}

/// Class-K function shaping the barrier decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassKappa {
    /// `alpha(h) = alpha0 * h` with `alpha0 > 0`.
    Linear { alpha0: f64 },
}

impl ClassKappa {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            ClassKappa::Linear { alpha0 } => alpha0 * h,
        }
    }
}

/// How the position-only barrier is lifted to the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMode {
    /// `nu` acts as a velocity command; the barrier has relative degree one.
    Kinematic,
    /// `nu` is an acceleration; the extended barrier
    /// `h_e = h_dot + lambda h` restores relative degree one.
    Extended { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub alpha: ClassKappa,
    pub mode: FilterMode,
    /// Componentwise input box, `(lower, upper)`.
    pub bounds: Option<(Vec2, Vec2)>,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha: ClassKappa::Linear { alpha0: 1.0 },
            mode: FilterMode::Kinematic,
            bounds: None,
            qp_tol: 1e-8,
            qp_max_iter: 20_000,
        }
    }
}

/// Diagnostics attached to a filtered command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterReport {
    /// Whether the barrier row constrained the answer.
    pub active: bool,
    /// QP iterations (0 when the identity shortcut or closed form ran).
    pub qp_iterations: usize,
    /// Worst KKT residual of the QP solve (0 for the shortcut).
    pub kkt_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    /// Input bounds exclude every input satisfying the barrier row.
    Infeasible { h: f64 },
    /// The barrier gradient vanishes (state at the ellipse center) and the
    /// barrier row cannot be satisfied.
    DegenerateGradient,
    /// Closed form requested with input bounds configured.
    BoundsUnsupported,
    Qp(QpError),
}

impl core::fmt::Display for FilterError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FilterError::Infeasible { h } => {
                write!(f, "barrier row infeasible under input bounds (h = {h})")
            }
            FilterError::DegenerateGradient => {
                write!(f, "barrier gradient vanished at the ellipse center")
            }
            FilterError::BoundsUnsupported => {
                write!(f, "closed-form filter does not support input bounds")
            }
            FilterError::Qp(e) => write!(f, "QP failure: {e}"),
        }
    }
}

impl core::error::Error for FilterError {}

/// Builds the quadratic barrier of an ellipse.
pub fn build_ellipse_cbf(ellipse: &Ellipse) -> EllipseCbf {
    let r = rotation(ellipse.theta);
    let d = Mat2::new(1.0 / (ellipse.a * ellipse.a), 0.0, 0.0, 1.0 / (ellipse.b * ellipse.b));
    let a_mat = r * d * r.transpose();
    let b_vec = -2.0 * (a_mat * ellipse.center);
    let c = (a_mat * ellipse.center).dot(&ellipse.center) - 1.0;
    EllipseCbf { a_mat, b_vec, c, ellipse: *ellipse }
}

/// Barrier value `h(x)`.
pub fn h_value(cbf: &EllipseCbf, pos: Vec2) -> f64 {
    (cbf.a_mat * pos).dot(&pos) + cbf.b_vec.dot(&pos) + cbf.c
}

/// Barrier gradient `2 A x + B`.
pub fn h_gradient(cbf: &EllipseCbf, pos: Vec2) -> Vec2 {
    2.0 * (cbf.a_mat * pos) + cbf.b_vec
}

/// Gait-region indicator: the barrier value of the gait ellipse at the base
/// position (positive outside, negative inside).
pub fn evaluate_gait_region(cbf: &EllipseCbf, pos: Vec2) -> f64 {
    h_value(cbf, pos)
}

/// The half-plane `row' nu >= rhs` enforced on the input at `state`.
pub fn constraint_row(cbf: &EllipseCbf, state: &ReducedState, config: &FilterConfig) -> (Vec2, f64) {
    let h = h_value(cbf, state.pos);
    let grad = h_gradient(cbf, state.pos);
    match config.mode {
        FilterMode::Kinematic => (grad, -config.alpha.eval(h)),
        FilterMode::Extended { lambda } => {
            // h_e = grad' v + lambda h; its derivative along phi_ddot = nu is
            // 2 v' A v + grad' nu + lambda grad' v.
            let h_dot = grad.dot(&state.vel);
            let h_e = h_dot + lambda * h;
            let curvature = 2.0 * (cbf.a_mat * state.vel).dot(&state.vel);
            (grad, -config.alpha.eval(h_e) - curvature - lambda * h_dot)
        }
    }
}

/// Safety filter through the QP solver.
///
/// Returns the input unchanged (exactly) when `nu_d` already satisfies the
/// barrier row and the bounds.
pub fn filter_qp(
    cbf: &EllipseCbf,
    state: &ReducedState,
    nu_d: Vec2,
    config: &FilterConfig,
) -> Result<(Vec2, FilterReport), FilterError> {
    let mut solver = QpSolver::new(QpSettings {
        tol: config.qp_tol,
        max_iter: config.qp_max_iter,
        ..QpSettings::default()
    });
    filter_qp_with(&mut solver, cbf, state, nu_d, config)
}

/// [`filter_qp`] against a caller-owned solver, so sequential calls in a
/// control loop warm-start from the previous tick's primal/dual pair.
pub fn filter_qp_with(
    solver: &mut QpSolver,
    cbf: &EllipseCbf,
    state: &ReducedState,
    nu_d: Vec2,
    config: &FilterConfig,
) -> Result<(Vec2, FilterReport), FilterError> {
    let (row, rhs) = constraint_row(cbf, state, config);
    let in_bounds = config
        .bounds
        .map_or(true, |(lo, hi)| (0..2).all(|i| lo[i] <= nu_d[i] && nu_d[i] <= hi[i]));
    if row.dot(&nu_d) >= rhs && in_bounds {
        return Ok((nu_d, FilterReport { active: false, qp_iterations: 0, kkt_max: 0.0 }));
    }
    let mut problem = QpProblem::new(
        DMatrix::from_diagonal_element(2, 2, 2.0),
        DVector::from_vec(alloc::vec![-2.0 * nu_d.x, -2.0 * nu_d.y]),
    );
    problem.g = DMatrix::from_row_slice(1, 2, &[-row.x, -row.y]);
    problem.h = DVector::from_element(1, -rhs);
    if let Some((lo, hi)) = config.bounds {
        problem.lb = Some(DVector::from_vec(alloc::vec![lo.x, lo.y]));
        problem.ub = Some(DVector::from_vec(alloc::vec![hi.x, hi.y]));
    }
    let sol = solver.solve(&problem).map_err(FilterError::Qp)?;
    match sol.status {
        QpStatus::Solved => {
            let nu = Vec2::new(sol.z[0], sol.z[1]);
            let active = sol.ineq_duals[0] > config.qp_tol.max(1e-12);
            Ok((nu, FilterReport { active, qp_iterations: sol.iterations, kkt_max: sol.kkt.max() }))
        }
        QpStatus::PrimalInfeasible => Err(FilterError::Infeasible { h: h_value(cbf, state.pos) }),
        _ => Err(FilterError::Qp(QpError::InvalidData)),
    }
}

/// Analytic single-constraint projection (no input bounds):
/// `nu = nu_d + max(0, rhs - row' nu_d) / (row' row) * row`.
pub fn filter_closed_form(
    cbf: &EllipseCbf,
    state: &ReducedState,
    nu_d: Vec2,
    config: &FilterConfig,
) -> Result<Vec2, FilterError> {
    if config.bounds.is_some() {
        return Err(FilterError::BoundsUnsupported);
    }
    let (row, rhs) = constraint_row(cbf, state, config);
    let deficit = rhs - row.dot(&nu_d);
    if deficit <= 0.0 {
        return Ok(nu_d);
    }
    let row_sq = row.dot(&row);
    if row_sq <= f64::MIN_POSITIVE {
        return Err(FilterError::DegenerateGradient);
    }
    Ok(nu_d + (deficit / row_sq) * row)
}
