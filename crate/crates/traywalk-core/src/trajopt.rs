//! Phase-sequenced center-of-mass trajectory generation for level
//! transitions (climbing down into or up out of the tray).
//!
//! A transition is a fixed five-phase support sequence. Going down the
//! support set changes all-feet, rear-support, all-feet, front-support,
//! all-feet; going up runs the mirror pattern. The COM path is a convex
//! transcription over a coarse knot grid (0.1 s): exact discrete
//! double-integrator dynamics, per-knot support-polygon membership, pinned
//! boundary positions, zero boundary velocities, minimum summed squared
//! acceleration. Knots on a phase boundary must lie in both adjacent
//! polygons. The coarse solution is densified with a clamped cubic spline
//! at 1 ms.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

#[allow(unused_imports)] // inherent f64 methods shadow the shim in std builds
use crate::math::FloatExt as _;

use crate::geometry::{cross, Vec2};
use crate::qp::{QpProblem, QpSettings, QpSolver, QpStatus};

/// Knot spacing of the coarse transcription, seconds.
pub const KNOT_DT: f64 = 0.1;
/// Sample spacing of the dense spline output, seconds.
pub const DENSE_DT: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Downward,
    Upward,
}

/// Support mode of one phase: which contacts carry the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    AllFeet,
    RearSupport,
    FrontSupport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub direction: Direction,
    pub phases: Vec<Phase>,
}

impl PhaseSchedule {
    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Cumulative end times of each phase.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.phases
            .iter()
            .map(|p| {
                acc += p.duration;
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajError {
    NonPositiveDuration { value: f64 },
    /// Phase boundaries must land on the 0.1 s knot grid.
    OffGridBoundary { time: f64 },
    BadPolygon { phase: usize, reason: &'static str },
    PolygonCountMismatch { expected: usize, got: usize },
    StartOutsideFirstPolygon,
    GoalOutsideLastPolygon,
    /// Adjacent phase polygons share no point at a boundary knot.
    EmptyPhaseIntersection { knot: usize, phases: (usize, usize) },
    QpFailed { status: QpStatus },
}

impl core::fmt::Display for TrajError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrajError::NonPositiveDuration { value } => {
                write!(f, "phase durations must be positive, got {value}")
            }
            TrajError::OffGridBoundary { time } => {
                write!(f, "phase boundary at {time} s is off the {KNOT_DT} s knot grid")
            }
            TrajError::BadPolygon { phase, reason } => {
                write!(f, "support polygon of phase {phase} is invalid: {reason}")
            }
            TrajError::PolygonCountMismatch { expected, got } => {
                write!(f, "need one polygon per phase ({expected}), got {got}")
            }
            TrajError::StartOutsideFirstPolygon => {
                write!(f, "start position lies outside the first-phase support polygon")
            }
            TrajError::GoalOutsideLastPolygon => {
                write!(f, "goal position lies outside the last-phase support polygon")
            }
            TrajError::EmptyPhaseIntersection { knot, phases } => write!(
                f,
                "knot {knot} sits on the boundary of phases {} and {} whose polygons do not intersect",
                phases.0, phases.1
            ),
            TrajError::QpFailed { status } => {
                write!(f, "trajectory QP did not solve: {status:?}")
            }
        }
    }
}

impl core::error::Error for TrajError {}

/// Five-phase schedule for the given direction.
pub fn build_schedule(
    direction: Direction,
    t_a: f64,
    t_r: f64,
    t_f: f64,
) -> Result<PhaseSchedule, TrajError> {
    for d in [t_a, t_r, t_f] {
        if !(d > 0.0) {
            return Err(TrajError::NonPositiveDuration { value: d });
        }
    }
    let (second, fourth) = match direction {
        Direction::Downward => (PhaseKind::RearSupport, PhaseKind::FrontSupport),
        Direction::Upward => (PhaseKind::FrontSupport, PhaseKind::RearSupport),
    };
    let dur = |kind: PhaseKind| match kind {
        PhaseKind::AllFeet => t_a,
        PhaseKind::RearSupport => t_r,
        PhaseKind::FrontSupport => t_f,
    };
    let phases = [PhaseKind::AllFeet, second, PhaseKind::AllFeet, fourth, PhaseKind::AllFeet]
        .into_iter()
        .map(|kind| Phase { kind, duration: dur(kind) })
        .collect();
    Ok(PhaseSchedule { direction, phases })
}

/// Convex support polygon, stored counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygon {
    vertices: Vec<Vec2>,
}

impl SupportPolygon {
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, &'static str> {
        if vertices.len() < 3 {
            return Err("needs at least three vertices");
        }
        let n = vertices.len();
        let area2: f64 = (0..n)
            .map(|i| cross(vertices[i], vertices[(i + 1) % n]))
            .sum();
        if area2.abs() < 1e-12 {
            return Err("degenerate (zero area)");
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(b - a, c - b) < -1e-12 {
                return Err("not convex");
            }
        }
        Ok(SupportPolygon { vertices })
    }

    pub fn rectangle(center: Vec2, width: f64, height: f64) -> Self {
        let hw = width / 2.0;
        let hh = height / 2.0;
        SupportPolygon::new(vec![
            center + Vec2::new(-hw, -hh),
            center + Vec2::new(hw, -hh),
            center + Vec2::new(hw, hh),
            center + Vec2::new(-hw, hh),
        ])
        .expect("axis-aligned rectangle is convex")
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Half-plane rows (n, b) with n a unit inward normal: membership is
    /// n.dot(x) >= b.
    pub fn half_planes(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            let normal = Vec2::new(-edge.y, edge.x) / edge.norm();
            (normal, normal.dot(&a))
        })
    }

    /// Membership with the polygon shrunk inward by `margin` (negative
    /// grows it).
    pub fn contains(&self, p: Vec2, margin: f64) -> bool {
        self.half_planes().all(|(n, b)| n.dot(&p) >= b + margin)
    }

    pub fn centroid(&self) -> Vec2 {
        self.vertices.iter().sum::<Vec2>() / self.vertices.len() as f64
    }
}

/// Per-phase support polygons plus a uniform shrink margin applied to
/// every membership constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygonSpec {
    pub polygons: Vec<SupportPolygon>,
    pub shrink_margin: f64,
}

impl SupportPolygonSpec {
    pub fn new(polygons: Vec<SupportPolygon>) -> Self {
        SupportPolygonSpec { polygons, shrink_margin: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub pos: Vec2,
    pub vel: Vec2,
    /// Acceleration of the interval starting at this knot (the final knot
    /// repeats the last interval's value).
    pub acc: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSample {
    pub t: f64,
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComTrajectory {
    pub knots: Vec<Knot>,
    pub dense: Vec<DenseSample>,
    /// Sum of squared knot accelerations (the QP objective).
    pub objective: f64,
}

/// Phase indices whose polygon constrains each knot (two on boundaries).
fn knot_phases(schedule: &PhaseSchedule, num_knots: usize) -> Vec<Vec<usize>> {
    let bounds = schedule.boundaries();
    let mut out = Vec::with_capacity(num_knots);
    for i in 0..num_knots {
        let t = i as f64 * KNOT_DT;
        let mut phases = Vec::with_capacity(2);
        let mut start = 0.0;
        for (k, &end) in bounds.iter().enumerate() {
            if t > start - 1e-9 && t < end + 1e-9 {
                phases.push(k);
            }
            start = end;
        }
        out.push(phases);
    }
    out
}

pub fn generate_com_trajectory(
    schedule: &PhaseSchedule,
    spec: &SupportPolygonSpec,
    start: Vec2,
    goal: Vec2,
) -> Result<ComTrajectory, TrajError> {
    let np = schedule.phases.len();
    if spec.polygons.len() != np {
        return Err(TrajError::PolygonCountMismatch { expected: np, got: spec.polygons.len() });
    }
    for p in &schedule.phases {
        if !(p.duration > 0.0) {
            return Err(TrajError::NonPositiveDuration { value: p.duration });
        }
    }
    for b in schedule.boundaries() {
        let steps = b / KNOT_DT;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(TrajError::OffGridBoundary { time: b });
        }
    }
    let total = schedule.total_duration();
    let n = (total / KNOT_DT).round() as usize; // intervals
    let nk = n + 1;
    let margin = spec.shrink_margin;

    if !spec.polygons[0].contains(start, margin) {
        return Err(TrajError::StartOutsideFirstPolygon);
    }
    if !spec.polygons[np - 1].contains(goal, margin) {
        return Err(TrajError::GoalOutsideLastPolygon);
    }

    let phases_per_knot = knot_phases(schedule, nk);

    // Boundary knots need a point common to both polygons; find the empty
    // intersections up front so the error can name the knot.
    for (i, phases) in phases_per_knot.iter().enumerate() {
        if phases.len() == 2 {
            let (a, b) = (phases[0], phases[1]);
            if !polygons_intersect(&spec.polygons[a], &spec.polygons[b], margin) {
                return Err(TrajError::EmptyPhaseIntersection { knot: i, phases: (a, b) });
            }
        }
    }

    // Variables: positions (2 per knot), velocities (2 per knot),
    // accelerations (2 per interval).
    let nv = 4 * nk + 2 * n;
    let pi = |i: usize| 2 * i;
    let vi = |i: usize| 2 * nk + 2 * i;
    let ai = |i: usize| 4 * nk + 2 * i;

    let mut p_mat = DMatrix::zeros(nv, nv);
    for i in 0..n {
        p_mat[(ai(i), ai(i))] = 2.0;
        p_mat[(ai(i) + 1, ai(i) + 1)] = 2.0;
    }
    let q_lin = DVector::zeros(nv);

    let ne = 4 * n + 8;
    let mut a_eq = DMatrix::zeros(ne, nv);
    let mut b_eq = DVector::zeros(ne);
    let h = KNOT_DT;
    let mut row = 0;
    for i in 0..n {
        for axis in 0..2 {
            // p_{i+1} = p_i + h v_i + h^2/2 a_i
            a_eq[(row, pi(i + 1) + axis)] = 1.0;
            a_eq[(row, pi(i) + axis)] = -1.0;
            a_eq[(row, vi(i) + axis)] = -h;
            a_eq[(row, ai(i) + axis)] = -0.5 * h * h;
            row += 1;
            // v_{i+1} = v_i + h a_i
            a_eq[(row, vi(i + 1) + axis)] = 1.0;
            a_eq[(row, vi(i) + axis)] = -1.0;
            a_eq[(row, ai(i) + axis)] = -h;
            row += 1;
        }
    }
    for axis in 0..2 {
        a_eq[(row, pi(0) + axis)] = 1.0;
        b_eq[row] = start[axis];
        row += 1;
        a_eq[(row, pi(n) + axis)] = 1.0;
        b_eq[row] = goal[axis];
        row += 1;
        a_eq[(row, vi(0) + axis)] = 1.0;
        row += 1;
        a_eq[(row, vi(n) + axis)] = 1.0;
        row += 1;
    }
    debug_assert_eq!(row, ne);

    let ni: usize = phases_per_knot
        .iter()
        .map(|ps| ps.iter().map(|&p| spec.polygons[p].vertices().len()).sum::<usize>())
        .sum();
    let mut g = DMatrix::zeros(ni, nv);
    let mut h_ineq = DVector::zeros(ni);
    let mut row = 0;
    for (i, phases) in phases_per_knot.iter().enumerate() {
        for &ph in phases {
            for (normal, offset) in spec.polygons[ph].half_planes() {
                // normal . p_i >= offset + margin
                g[(row, pi(i))] = -normal.x;
                g[(row, pi(i) + 1)] = -normal.y;
                h_ineq[row] = -(offset + margin);
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, ni);

    let mut problem = QpProblem::new(p_mat, q_lin);
    problem.a_eq = a_eq;
    problem.b_eq = b_eq;
    problem.g = g;
    problem.h = h_ineq;

    let mut solver = QpSolver::new(QpSettings { tol: 1e-8, max_iter: 200_000, ..QpSettings::default() });
    let sol = solver.solve(&problem).map_err(|_| TrajError::QpFailed {
        status: QpStatus::MaxIterations,
    })?;
    if sol.status != QpStatus::Solved {
        return Err(TrajError::QpFailed { status: sol.status });
    }

    let mut knots = Vec::with_capacity(nk);
    for i in 0..nk {
        let acc_idx = if i < n { i } else { n - 1 };
        knots.push(Knot {
            t: i as f64 * KNOT_DT,
            pos: Vec2::new(sol.z[pi(i)], sol.z[pi(i) + 1]),
            vel: Vec2::new(sol.z[vi(i)], sol.z[vi(i) + 1]),
            acc: Vec2::new(sol.z[ai(acc_idx)], sol.z[ai(acc_idx) + 1]),
        });
    }
    let dense = spline_interpolate(&knots, DENSE_DT);
    Ok(ComTrajectory { knots, dense, objective: sol.objective })
}

fn polygons_intersect(a: &SupportPolygon, b: &SupportPolygon, margin: f64) -> bool {
    // Feasibility problem: any point satisfying both half-plane sets.
    let rows = a.vertices().len() + b.vertices().len();
    let mut g = DMatrix::zeros(rows, 2);
    let mut h = DVector::zeros(rows);
    for (row, (normal, offset)) in a.half_planes().chain(b.half_planes()).enumerate() {
        g[(row, 0)] = -normal.x;
        g[(row, 1)] = -normal.y;
        h[row] = -(offset + margin);
    }
    let c = 0.5 * (a.centroid() + b.centroid());
    let mut problem = QpProblem::new(
        DMatrix::identity(2, 2) * 2.0,
        DVector::from_column_slice(&[-2.0 * c.x, -2.0 * c.y]),
    );
    problem.g = g;
    problem.h = h;
    let mut solver = QpSolver::new(QpSettings::default());
    match solver.solve(&problem) {
        Ok(sol) => sol.status == QpStatus::Solved,
        Err(_) => false,
    }
}

/// Clamped cubic spline through the knots, sampled every `dt_dense`
/// seconds. Endpoint first derivatives equal the boundary knot velocities.
pub fn spline_interpolate(knots: &[Knot], dt_dense: f64) -> Vec<DenseSample> {
    assert!(knots.len() >= 2, "spline needs at least two knots");
    assert!(dt_dense > 0.0);
    let n = knots.len() - 1;
    let t: Vec<f64> = knots.iter().map(|k| k.t).collect();
    let mut moments = [Vec::new(), Vec::new()];
    for axis in 0..2 {
        let y: Vec<f64> = knots.iter().map(|k| k.pos[axis]).collect();
        moments[axis] = clamped_spline_moments(&t, &y, knots[0].vel[axis], knots[n].vel[axis]);
    }

    let total = t[n] - t[0];
    let samples = (total / dt_dense).round() as usize;
    let mut out = Vec::with_capacity(samples + 1);
    let mut seg = 0;
    for s in 0..=samples {
        let time = t[0] + (s as f64 * dt_dense).min(total);
        while seg + 1 < n && time > t[seg + 1] {
            seg += 1;
        }
        let h = t[seg + 1] - t[seg];
        let dl = time - t[seg];
        let dr = t[seg + 1] - time;
        let mut pos = Vec2::zeros();
        let mut vel = Vec2::zeros();
        let mut acc = Vec2::zeros();
        for axis in 0..2 {
            let y0 = knots[seg].pos[axis];
            let y1 = knots[seg + 1].pos[axis];
            let m0 = moments[axis][seg];
            let m1 = moments[axis][seg + 1];
            pos[axis] = m0 * dr * dr * dr / (6.0 * h)
                + m1 * dl * dl * dl / (6.0 * h)
                + (y0 / h - m0 * h / 6.0) * dr
                + (y1 / h - m1 * h / 6.0) * dl;
            vel[axis] = -m0 * dr * dr / (2.0 * h)
                + m1 * dl * dl / (2.0 * h)
                + (y1 - y0) / h
                - (m1 - m0) * h / 6.0;
            acc[axis] = (m0 * dr + m1 * dl) / h;
        }
        out.push(DenseSample { t: time, pos, vel, acc });
    }
    out
}

/// Second derivatives of the clamped cubic spline (tridiagonal solve).
fn clamped_spline_moments(t: &[f64], y: &[f64], d0: f64, dn: f64) -> Vec<f64> {
    let n = t.len() - 1;
    let h: Vec<f64> = (0..n).map(|i| t[i + 1] - t[i]).collect();
    // Tridiagonal system: sub/diag/sup and right-hand side.
    let mut diag = vec![0.0; n + 1];
    let mut sub = vec![0.0; n + 1];
    let mut sup = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    diag[0] = h[0] / 3.0;
    sup[0] = h[0] / 6.0;
    rhs[0] = (y[1] - y[0]) / h[0] - d0;
    for i in 1..n {
        sub[i] = h[i - 1] / 6.0;
        diag[i] = (h[i - 1] + h[i]) / 3.0;
        sup[i] = h[i] / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
    }
    sub[n] = h[n - 1] / 6.0;
    diag[n] = h[n - 1] / 3.0;
    rhs[n] = dn - (y[n] - y[n - 1]) / h[n - 1];

    // Thomas algorithm.
    let mut c = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..=n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut m = vec![0.0; n + 1];
    m[n] = d[n];
    for i in (0..n).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

/// CSV header matching [`dense_csv_row`].
pub fn dense_csv_header() -> String {
    String::from("t,x,y,vx,vy,ax,ay")
}

pub fn dense_csv_row(s: &DenseSample) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        s.t, s.pos.x, s.pos.y, s.vel.x, s.vel.y, s.acc.x, s.acc.y
    )
}
