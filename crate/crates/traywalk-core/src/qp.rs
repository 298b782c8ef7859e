//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//!   minimize    1/2 z' P z + q' z
//!   subject to  A_eq z  = b_eq
//!               G z    <= h
//!               lb <= z <= ub        (entries may be infinite)
//! ```
//!
//! with `P` symmetric positive semidefinite. The solver is an operator
//! splitting (ADMM) iteration over the stacked constraint form
//! `l <= A z <= u`, preceded by Ruiz equilibration and followed by an
//! active-set polish step that re-solves the KKT system of the detected
//! active constraints. Polish is what brings the reported KKT residuals to
//! solver-precision levels; the raw ADMM iterates only have to get close
//! enough for the active set to be identified.
//!
//! Everything is deterministic: fixed iteration schedule, fixed residual
//! check and penalty rebalance intervals, no randomness, no parallelism.
//! Identical inputs produce bit-identical outputs.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

#[allow(unused_imports)] // inherent f64 methods shadow the shim in std builds
use crate::math::FloatExt as _;

/// Problem data. Empty matrices (0 rows) mean "no constraints of that kind".
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub lb: Option<DVector<f64>>,
    pub ub: Option<DVector<f64>>,
}

impl QpProblem {
    /// Unconstrained problem; add constraints by filling the public fields.
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            lb: None,
            ub: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(QpError::DimensionMismatch);
        }
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return Err(QpError::DimensionMismatch);
        }
        if self.a_eq.nrows() != self.b_eq.len() || self.g.nrows() != self.h.len() {
            return Err(QpError::DimensionMismatch);
        }
        if self.g.ncols() != n && self.g.nrows() > 0 {
            return Err(QpError::DimensionMismatch);
        }
        for b in [&self.lb, &self.ub].into_iter().flatten() {
            if b.len() != n {
                return Err(QpError::DimensionMismatch);
            }
        }
        let finite = self.p.iter().all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.a_eq.iter().all(|v| v.is_finite())
            && self.b_eq.iter().all(|v| v.is_finite())
            && self.g.iter().all(|v| v.is_finite())
            && self.h.iter().all(|v| !v.is_nan())
            && self.lb.iter().flat_map(|b| b.iter()).all(|v| !v.is_nan())
            && self.ub.iter().flat_map(|b| b.iter()).all(|v| !v.is_nan());
        if !finite {
            return Err(QpError::InvalidData);
        }
        if let (Some(lb), Some(ub)) = (&self.lb, &self.ub) {
            if lb.iter().zip(ub.iter()).any(|(l, u)| l > u) {
                return Err(QpError::InvalidData);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// KKT residuals within tolerance.
    Solved,
    /// Iteration budget exhausted; best iterate returned.
    MaxIterations,
    /// Constraint set certified infeasible (diverging dual direction).
    PrimalInfeasible,
    /// Objective certified unbounded below over the constraint set.
    DualInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `|| P z + q + A_eq' lambda + G' mu + bound duals ||_inf`
    pub stationarity: f64,
    /// Worst equality / inequality / bound violation.
    pub primal: f64,
    /// Worst `|dual * slack|` over inequality-type rows.
    pub complementarity: f64,
    /// Worst negative part of an inequality dual (should be ~0).
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual_sign)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Multipliers of the equality rows (free sign).
    pub eq_duals: DVector<f64>,
    /// Multipliers of the `G z <= h` rows (nonnegative up to tolerance).
    pub ineq_duals: DVector<f64>,
    /// Signed multipliers of the box rows: negative at an active lower
    /// bound, positive at an active upper bound, zero when inactive.
    pub bound_duals: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt: KktResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    DimensionMismatch,
    /// NaN in the data, or a lower bound above an upper bound.
    InvalidData,
}

impl core::fmt::Display for QpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            QpError::DimensionMismatch => write!(f, "inconsistent problem dimensions"),
            QpError::InvalidData => write!(f, "invalid problem data (NaN or lb > ub)"),
        }
    }
}

impl core::error::Error for QpError {}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    /// Absolute KKT tolerance required for `Solved`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Proximal regularization on the primal update.
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    /// Ruiz equilibration sweeps.
    pub scaling_iters: usize,
    /// Residuals are evaluated every this many iterations.
    pub check_interval: usize,
    /// Penalty rebalancing happens every this many iterations.
    pub rho_update_interval: usize,
    pub polish: bool,
    /// Static regularization used in the polish KKT solve.
    pub polish_delta: f64,
    pub warm_start: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 10,
            check_interval: 25,
            rho_update_interval: 100,
            polish: true,
            polish_delta: 1e-7,
            warm_start: true,
        }
    }
}

/// One-shot solve with the default settings, overriding tolerance and budget.
pub fn solve(problem: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    let mut solver = QpSolver::new(QpSettings { tol, max_iter, ..QpSettings::default() });
    solver.solve(problem)
}

/// Reusable solver carrying warm-start state between calls.
///
/// Not `Sync`: a solver instance belongs to one control loop. Re-use across
/// problems of the same dimensions keeps the previous primal/dual iterate as
/// the starting point.
#[derive(Debug, Clone)]
pub struct QpSolver {
    pub settings: QpSettings,
    warm: Option<(DVector<f64>, DVector<f64>)>,
}

/// Stacked-form data: `l <= A z <= u` over equality, inequality, bound rows.
struct Stacked {
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    n_eq: usize,
    n_ineq: usize,
    /// Variable index behind each bound row.
    bound_vars: Vec<usize>,
}

fn stack(problem: &QpProblem) -> Stacked {
    let n = problem.num_vars();
    let n_eq = problem.a_eq.nrows();
    let n_ineq = problem.g.nrows();
    let mut bound_vars = Vec::new();
    if problem.lb.is_some() || problem.ub.is_some() {
        for j in 0..n {
            let l = problem.lb.as_ref().map_or(f64::NEG_INFINITY, |b| b[j]);
            let u = problem.ub.as_ref().map_or(f64::INFINITY, |b| b[j]);
            if l > f64::NEG_INFINITY || u < f64::INFINITY {
                bound_vars.push(j);
            }
        }
    }
    let m = n_eq + n_ineq + bound_vars.len();
    let mut a = DMatrix::zeros(m, n);
    let mut l = DVector::from_element(m, f64::NEG_INFINITY);
    let mut u = DVector::from_element(m, f64::INFINITY);
    a.rows_mut(0, n_eq).copy_from(&problem.a_eq);
    l.rows_mut(0, n_eq).copy_from(&problem.b_eq);
    u.rows_mut(0, n_eq).copy_from(&problem.b_eq);
    a.rows_mut(n_eq, n_ineq).copy_from(&problem.g);
    u.rows_mut(n_eq, n_ineq).copy_from(&problem.h);
    for (k, &j) in bound_vars.iter().enumerate() {
        let row = n_eq + n_ineq + k;
        a[(row, j)] = 1.0;
        l[row] = problem.lb.as_ref().map_or(f64::NEG_INFINITY, |b| b[j]);
        u[row] = problem.ub.as_ref().map_or(f64::INFINITY, |b| b[j]);
    }
    Stacked { a, l, u, n_eq, n_ineq, bound_vars }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// KKT residuals of `(z, y)` on the original (unscaled) stacked data.
fn kkt_residuals(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    st: &Stacked,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> KktResiduals {
    let az = &st.a * z;
    let stat = inf_norm(&(p * z + q + st.a.transpose() * y));
    let mut primal = 0.0f64;
    let mut comp = 0.0f64;
    let mut sign = 0.0f64;
    for i in 0..st.a.nrows() {
        let (li, ui, v, yi) = (st.l[i], st.u[i], az[i], y[i]);
        primal = primal.max(v - ui).max(li - v);
        if li == ui {
            continue; // equality row: no sign/complementarity conditions
        }
        if yi > 0.0 {
            if ui < f64::INFINITY {
                comp = comp.max(yi * (ui - v).abs());
            } else {
                sign = sign.max(yi);
            }
        } else if yi < 0.0 {
            if li > f64::NEG_INFINITY {
                comp = comp.max(-yi * (v - li).abs());
            } else {
                sign = sign.max(-yi);
            }
        }
    }
    KktResiduals { stationarity: stat, primal: primal.max(0.0), complementarity: comp, dual_sign: sign }
}

struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

/// Modified Ruiz equilibration of the KKT data plus cost normalization.
fn ruiz(p: &mut DMatrix<f64>, q: &mut DVector<f64>, a: &mut DMatrix<f64>, iters: usize) -> Scaling {
    let (m, n) = (a.nrows(), a.ncols());
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut c = 1.0;
    for _ in 0..iters {
        let mut dd = DVector::from_element(n, 1.0);
        for j in 0..n {
            let col_p = (0..n).fold(0.0f64, |acc, i| acc.max(p[(i, j)].abs()));
            let col_a = (0..m).fold(0.0f64, |acc, i| acc.max(a[(i, j)].abs()));
            let norm = col_p.max(col_a);
            if norm > 0.0 {
                dd[j] = 1.0 / norm.sqrt();
            }
        }
        let mut de = DVector::from_element(m, 1.0);
        for i in 0..m {
            let row = (0..n).fold(0.0f64, |acc, j| acc.max(a[(i, j)].abs()));
            if row > 0.0 {
                de[i] = 1.0 / row.sqrt();
            }
        }
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
        }
        for j in 0..n {
            q[j] *= dd[j];
        }
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] *= de[i] * dd[j];
            }
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&de);

        // Cost scaling: pull the scaled objective toward unit magnitude.
        let mean_col = if n > 0 {
            (0..n)
                .map(|j| (0..n).fold(0.0f64, |acc, i| acc.max(p[(i, j)].abs())))
                .sum::<f64>()
                / n as f64
        } else {
            0.0
        };
        let gamma = 1.0 / mean_col.max(inf_norm(q)).max(1e-8);
        *p *= gamma;
        *q *= gamma;
        c *= gamma;
    }
    Scaling { d, e, c }
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings, warm: None }
    }

    /// Drops the warm-start iterate.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution, QpError> {
        problem.validate()?;
        let s = self.settings;
        let n = problem.num_vars();
        let st = stack(problem);
        let m = st.a.nrows();

        // Symmetrized copy of P; the iteration assumes exact symmetry.
        let mut p_s = 0.5 * (&problem.p + problem.p.transpose());
        let p_orig = p_s.clone();
        let mut q_s = problem.q.clone();
        let mut a_s = st.a.clone();
        let sc = ruiz(&mut p_s, &mut q_s, &mut a_s, s.scaling_iters);
        let l_s = DVector::from_fn(m, |i, _| st.l[i] * sc.e[i]);
        let u_s = DVector::from_fn(m, |i, _| st.u[i] * sc.e[i]);

        // Per-row penalties: equality rows get a stiffer penalty.
        let mut rho_bar = s.rho;
        let build_rho = |rho_bar: f64| {
            DVector::from_fn(m, |i, _| {
                if st.l[i] == st.u[i] {
                    (rho_bar * 1e3).clamp(1e-6, 1e6)
                } else {
                    rho_bar.clamp(1e-6, 1e6)
                }
            })
        };
        let mut rho = build_rho(rho_bar);

        let factorize = |p_s: &DMatrix<f64>, a_s: &DMatrix<f64>, rho: &DVector<f64>| {
            let mut mmat = p_s.clone();
            for i in 0..n {
                mmat[(i, i)] += s.sigma;
            }
            // M += A' R A
            for r in 0..m {
                let w = rho[r];
                for i in 0..n {
                    let ari = a_s[(r, i)];
                    if ari == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        mmat[(i, j)] += w * ari * a_s[(r, j)];
                    }
                }
            }
            nalgebra::Cholesky::new(mmat)
        };
        let mut chol = factorize(&p_s, &a_s, &rho).ok_or(QpError::InvalidData)?;

        // Scaled iterates (x primal, zv slack, y dual).
        let (mut x, mut y) = match (&self.warm, s.warm_start) {
            (Some((wx, wy)), true) if wx.len() == n && wy.len() == m => {
                let x = DVector::from_fn(n, |i, _| wx[i] / sc.d[i]);
                let y = DVector::from_fn(m, |i, _| wy[i] * sc.c / sc.e[i]);
                (x, y)
            }
            _ => (DVector::zeros(n), DVector::zeros(m)),
        };
        let mut zv = (&a_s * &x).zip_zip_map(&l_s, &u_s, |v, l, u| v.clamp(l, u));

        let unscale = |x: &DVector<f64>, y: &DVector<f64>| {
            let zu = DVector::from_fn(n, |i, _| x[i] * sc.d[i]);
            let yu = DVector::from_fn(m, |i, _| y[i] * sc.e[i] / sc.c);
            (zu, yu)
        };

        let mut status = QpStatus::MaxIterations;
        let mut iterations = s.max_iter;
        let mut best: Option<(DVector<f64>, DVector<f64>, KktResiduals)> = None;

        let mut iter = 0;
        while iter < s.max_iter {
            iter += 1;
            // x update
            let mut rhs = s.sigma * &x - &q_s;
            let t = DVector::from_fn(m, |i, _| rho[i] * zv[i] - y[i]);
            rhs += a_s.transpose() * t;
            let x_t = chol.solve(&rhs);
            let z_t = &a_s * &x_t;
            let x_next = s.alpha * &x_t + (1.0 - s.alpha) * &x;
            let z_relax = s.alpha * &z_t + (1.0 - s.alpha) * &zv;
            let z_next = DVector::from_fn(m, |i, _| {
                (z_relax[i] + y[i] / rho[i]).clamp(l_s[i], u_s[i])
            });
            let y_next = DVector::from_fn(m, |i, _| {
                y[i] + rho[i] * (z_relax[i] - z_next[i])
            });

            let dx = &x_next - &x;
            let dy = &y_next - &y;
            x = x_next;
            zv = z_next;
            y = y_next;

            if iter % s.check_interval == 0 || iter == s.max_iter {
                let (zu, yu) = unscale(&x, &y);
                let res = kkt_residuals(&p_orig, &problem.q, &st, &zu, &yu);
                if best.as_ref().is_none_or(|(_, _, b)| res.max() < b.max()) {
                    best = Some((zu.clone(), yu.clone(), res));
                }
                if res.within(s.tol) {
                    status = QpStatus::Solved;
                    iterations = iter;
                    break;
                }
                // Near convergence, polish can close the remaining gap.
                if s.polish && res.max() <= (s.tol * 1e4).max(1e-5) {
                    if let Some((pz, py, pres)) = self.polish(problem, &p_orig, &st, &zu, &yu) {
                        if pres.within(s.tol) {
                            let sol = assemble(problem, &p_orig, &st, pz, py, pres, QpStatus::Solved, iter);
                            self.store_warm(&sol, &st);
                            return Ok(sol);
                        }
                    }
                }
                if let Some(stat) = infeasibility_certificate(&p_s, &q_s, &a_s, &l_s, &u_s, &dx, &dy) {
                    status = stat;
                    iterations = iter;
                    break;
                }
            }

            if iter % s.rho_update_interval == 0 {
                // Rebalance the penalty from the scaled residual ratio.
                let az = &a_s * &x;
                let rp = inf_norm(&(&az - &zv));
                let rd = inf_norm(&(&p_s * &x + &q_s + a_s.transpose() * &y));
                let rp_rel = rp / inf_norm(&az).max(inf_norm(&zv)).max(1e-10);
                let rd_rel = rd / (&p_s * &x)
                    .iter()
                    .chain((a_s.transpose() * &y).iter())
                    .chain(q_s.iter())
                    .fold(0.0f64, |a, v| a.max(v.abs()))
                    .max(1e-10);
                let ratio = (rp_rel / rd_rel.max(1e-12)).sqrt();
                let new_rho = (rho_bar * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * rho_bar || new_rho < rho_bar / 5.0 {
                    rho_bar = new_rho;
                    rho = build_rho(rho_bar);
                    chol = factorize(&p_s, &a_s, &rho).ok_or(QpError::InvalidData)?;
                }
            }
        }

        if status == QpStatus::PrimalInfeasible || status == QpStatus::DualInfeasible {
            let (zu, yu) = unscale(&x, &y);
            let res = kkt_residuals(&p_orig, &problem.q, &st, &zu, &yu);
            return Ok(assemble(problem, &p_orig, &st, zu, yu, res, status, iterations));
        }

        let (mut zu, mut yu, mut res) = best.expect("at least one residual check ran");
        if s.polish {
            if let Some((pz, py, pres)) = self.polish(problem, &p_orig, &st, &zu, &yu) {
                if pres.max() < res.max() {
                    (zu, yu, res) = (pz, py, pres);
                }
            }
        }
        if res.within(s.tol) {
            status = QpStatus::Solved;
        }
        let sol = assemble(problem, &p_orig, &st, zu, yu, res, status, iterations);
        self.store_warm(&sol, &st);
        Ok(sol)
    }

    fn store_warm(&mut self, sol: &QpSolution, st: &Stacked) {
        let mut y = DVector::zeros(st.a.nrows());
        y.rows_mut(0, st.n_eq).copy_from(&sol.eq_duals);
        y.rows_mut(st.n_eq, st.n_ineq).copy_from(&sol.ineq_duals);
        for (k, &j) in st.bound_vars.iter().enumerate() {
            y[st.n_eq + st.n_ineq + k] = sol.bound_duals[j];
        }
        self.warm = Some((sol.z.clone(), y));
    }

    /// Re-solves the equality-constrained KKT system of the active set, with
    /// static regularization plus iterative refinement against the
    /// unregularized system.
    fn polish(
        &self,
        problem: &QpProblem,
        p: &DMatrix<f64>,
        st: &Stacked,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, KktResiduals)> {
        let n = problem.num_vars();
        let m = st.a.nrows();
        let az = &st.a * z;
        let thr = 1e-8 * inf_norm(y).max(1.0);
        let mut active: Vec<(usize, f64)> = Vec::new(); // (row, bound value)
        for i in 0..m {
            if st.l[i] == st.u[i] {
                active.push((i, st.u[i]));
            } else if y[i] > thr && st.u[i] < f64::INFINITY {
                active.push((i, st.u[i]));
            } else if y[i] < -thr && st.l[i] > f64::NEG_INFINITY {
                active.push((i, st.l[i]));
            } else {
                // Weakly active rows: sitting on the bound with a ~zero dual.
                let su = st.u[i] - az[i];
                let sl = az[i] - st.l[i];
                if st.u[i] < f64::INFINITY && su.abs() <= 1e-10 * st.u[i].abs().max(1.0) {
                    active.push((i, st.u[i]));
                } else if st.l[i] > f64::NEG_INFINITY && sl.abs() <= 1e-10 * st.l[i].abs().max(1.0) {
                    active.push((i, st.l[i]));
                }
            }
        }
        let k = active.len();
        let dim = n + k;
        let delta = self.settings.polish_delta;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        for i in 0..n {
            kkt[(i, i)] += delta;
        }
        for (r, &(row, _)) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = st.a[(row, j)];
                kkt[(j, n + r)] = st.a[(row, j)];
            }
            kkt[(n + r, n + r)] = -delta;
        }
        let lu = kkt.lu();
        let mut sol = DVector::zeros(dim);
        // Iterative refinement on the unregularized KKT system.
        for _ in 0..6 {
            let mut resid = DVector::zeros(dim);
            let xs = sol.rows(0, n).into_owned();
            let ys = sol.rows(n, k).into_owned();
            let px = p * &xs;
            for i in 0..n {
                let mut aty = 0.0;
                for (r, &(row, _)) in active.iter().enumerate() {
                    aty += st.a[(row, i)] * ys[r];
                }
                resid[i] = -problem.q[i] - px[i] - aty;
            }
            for (r, &(row, b)) in active.iter().enumerate() {
                let mut ax = 0.0;
                for j in 0..n {
                    ax += st.a[(row, j)] * xs[j];
                }
                resid[n + r] = b - ax;
            }
            let dz = lu.solve(&resid)?;
            sol += dz;
        }
        let zp = sol.rows(0, n).into_owned();
        let mut yp = DVector::zeros(m);
        for (r, &(row, _)) in active.iter().enumerate() {
            yp[row] = sol[n + r];
        }
        // Reject sign-inverted inequality duals instead of reporting them.
        for i in 0..m {
            if st.l[i] == st.u[i] {
                continue;
            }
            let at_upper = st.u[i] < f64::INFINITY && (az[i] - st.u[i]).abs() <= (st.a.row(i).amax() * 1e-6).max(1e-9);
            if yp[i] < 0.0 && !at_upper && st.l[i] == f64::NEG_INFINITY {
                return None;
            }
        }
        let res = kkt_residuals(p, &problem.q, st, &zp, &yp);
        Some((zp, yp, res))
    }
}

/// Detects diverging directions certifying primal or dual infeasibility.
fn infeasibility_certificate(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
) -> Option<QpStatus> {
    let eps = 1e-9;
    let ndy = inf_norm(dy);
    if ndy > eps {
        let dyn_ = dy / ndy;
        let aty = inf_norm(&(a.transpose() * &dyn_));
        let mut support = 0.0;
        let mut ok = true;
        for i in 0..a.nrows() {
            let v = dyn_[i];
            if v > eps {
                if u[i] == f64::INFINITY {
                    ok = false;
                    break;
                }
                support += u[i] * v;
            } else if v < -eps {
                if l[i] == f64::NEG_INFINITY {
                    ok = false;
                    break;
                }
                support += l[i] * v;
            }
        }
        if ok && aty <= 1e-6 && support <= -1e-6 {
            return Some(QpStatus::PrimalInfeasible);
        }
    }
    let ndx = inf_norm(dx);
    if ndx > eps {
        let dxn = dx / ndx;
        let pdx = inf_norm(&(p * &dxn));
        let qdx = q.dot(&dxn);
        let adx = a * &dxn;
        let mut cone_ok = true;
        for i in 0..a.nrows() {
            let v = adx[i];
            if (u[i] < f64::INFINITY && v > 1e-6) || (l[i] > f64::NEG_INFINITY && v < -1e-6) {
                cone_ok = false;
                break;
            }
        }
        if pdx <= 1e-6 && qdx <= -1e-6 && cone_ok {
            return Some(QpStatus::DualInfeasible);
        }
    }
    None
}

fn assemble(
    problem: &QpProblem,
    p: &DMatrix<f64>,
    st: &Stacked,
    z: DVector<f64>,
    y: DVector<f64>,
    kkt: KktResiduals,
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let n = problem.num_vars();
    let eq_duals = y.rows(0, st.n_eq).into_owned();
    let ineq_duals = y.rows(st.n_eq, st.n_ineq).into_owned();
    let mut bound_duals = DVector::zeros(n);
    for (k, &j) in st.bound_vars.iter().enumerate() {
        bound_duals[j] = y[st.n_eq + st.n_ineq + k];
    }
    let objective = 0.5 * (p * &z).dot(&z) + problem.q.dot(&z);
    QpSolution { z, eq_duals, ineq_duals, bound_duals, status, iterations, objective, kkt }
}
