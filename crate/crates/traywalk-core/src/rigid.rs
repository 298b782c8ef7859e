//! Planar (sagittal) rigid-body dynamics of the quadruped.
//!
//! The model has seven generalized coordinates
//!
//! ```text
//!   q = [x_b, z_b, pitch, front_hip, front_knee, back_hip, back_knee]
//! ```
//!
//! built as a kinematic tree: two virtual prismatic joints and one virtual
//! revolute joint carry the floating base, and each leg is a hip/knee
//! revolute pair. Five bodies carry mass: the base and the two thigh/calf
//! pairs (left/right legs are lumped per sagittal leg by the caller's
//! choice of parameters).
//!
//! Dynamics use planar spatial algebra with vectors (omega, vx, vy):
//! inverse dynamics by recursive Newton-Euler (gravity handled as a
//! fictitious base acceleration), the mass matrix by the composite
//! rigid-body algorithm. Both are cross-checked against each other in the
//! tests, column by column.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};

#[allow(unused_imports)] // inherent f64 methods shadow the shim in std builds
use crate::math::FloatExt as _;

use crate::geometry::{rotation, Mat2, Vec2};

pub const NQ: usize = 7;
pub const NU: usize = 4;

pub type VecN = SVector<f64, NQ>;
pub type MatN = SMatrix<f64, NQ, NQ>;
pub type VecU = SVector<f64, NU>;

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

// ---------------------------------------------------------------------------
// planar spatial algebra

/// Pose of a child frame in its parent: rotation then translation.
#[derive(Debug, Clone, Copy)]
struct Xform {
    rot: Mat2,
    pos: Vec2,
}

fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

impl Xform {
    /// Motion transform: maps a motion vector in parent coordinates to
    /// child coordinates.
    fn motion_matrix(&self) -> M3 {
        let rt = self.rot.transpose();
        let col0 = rt * perp(self.pos);
        let mut x = M3::zeros();
        x[(0, 0)] = 1.0;
        x[(1, 0)] = col0.x;
        x[(2, 0)] = col0.y;
        x.fixed_view_mut::<2, 2>(1, 1).copy_from(&rt);
        x
    }

    /// Force transform, the inverse transpose of the motion transform.
    #[cfg(test)]
    fn force_matrix(&self) -> M3 {
        let rt = self.rot.transpose();
        let mut x = M3::zeros();
        x[(0, 0)] = 1.0;
        x[(0, 1)] = self.pos.y;
        x[(0, 2)] = -self.pos.x;
        x.fixed_view_mut::<2, 2>(1, 1).copy_from(&rt);
        x
    }
}

/// Motion cross product matrix, v x m.
fn crm(v: V3) -> M3 {
    M3::new(
        0.0, 0.0, 0.0, //
        v
        .z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Force cross product matrix, v x* f = -crm(v)^T f.
fn crf(v: V3) -> M3 {
    -crm(v).transpose()
}

/// Spatial inertia about the frame origin for a body of mass m, center of
/// mass c (frame coordinates) and rotational inertia izz about the center
/// of mass.
fn spatial_inertia(mass: f64, com: Vec2, izz: f64) -> M3 {
    M3::new(
        izz + mass * com.norm_squared(),
        -mass * com.y,
        mass * com.x,
        -mass * com.y,
        mass,
        0.0,
        mass * com.x,
        0.0,
        mass,
    )
}

// ---------------------------------------------------------------------------
// model

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vec2,
    /// Rotational inertia about the center of mass.
    pub izz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub base: LinkParams,
    pub thigh: LinkParams,
    pub calf: LinkParams,
    /// Hip pivots sit at (+-hip_offset_x, 0) in the base frame.
    pub hip_offset_x: f64,
    pub thigh_len: f64,
    pub calf_len: f64,
    /// Signed gravity along +z, negative pulls down.
    pub gravity: f64,
    pub torque_limit: f64,
    pub friction_mu: f64,
    /// Leg joint position range (symmetric for hip and knee).
    pub joint_pos_limit: (f64, f64),
    pub joint_vel_limit: f64,
    /// Nominal standing base height.
    pub standing_height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NonPositive { field: &'static str, value: f64 },
    BadInterval { field: &'static str, lo: f64, hi: f64 },
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::NonPositive { field, value } => {
                write!(f, "model parameter {field} must be positive, got {value}")
            }
            ModelError::BadInterval { field, lo, hi } => {
                write!(f, "model limit {field} is not a proper interval: [{lo}, {hi}]")
            }
        }
    }
}

impl core::error::Error for ModelError {}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("base.mass", self.base.mass),
            ("base.izz", self.base.izz),
            ("thigh.mass", self.thigh.mass),
            ("thigh.izz", self.thigh.izz),
            ("calf.mass", self.calf.mass),
            ("calf.izz", self.calf.izz),
            ("hip_offset_x", self.hip_offset_x),
            ("thigh_len", self.thigh_len),
            ("calf_len", self.calf_len),
            ("torque_limit", self.torque_limit),
            ("friction_mu", self.friction_mu),
            ("joint_vel_limit", self.joint_vel_limit),
            ("standing_height", self.standing_height),
        ];
        for (field, value) in positive {
            if !(value > 0.0) {
                return Err(ModelError::NonPositive { field, value });
            }
        }
        if !(self.joint_pos_limit.0 < self.joint_pos_limit.1) {
            return Err(ModelError::BadInterval {
                field: "joint_pos_limit",
                lo: self.joint_pos_limit.0,
                hi: self.joint_pos_limit.1,
            });
        }
        if !(self.gravity < 0.0) {
            return Err(ModelError::NonPositive { field: "-gravity", value: -self.gravity });
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        // Loosely sized after a small ~12 kg quadruped with 0.2 m segments.
        ModelParams {
            base: LinkParams {
                mass: 10.0,
                com: Vec2::zeros(),
                izz: 10.0 * (0.36 * 0.36 + 0.1 * 0.1) / 12.0,
            },
            thigh: LinkParams { mass: 0.8, com: Vec2::new(0.0, -0.1), izz: 0.8 * 0.04 / 12.0 },
            calf: LinkParams { mass: 0.2, com: Vec2::new(0.0, -0.1), izz: 0.2 * 0.04 / 12.0 },
            hip_offset_x: 0.18,
            thigh_len: 0.2,
            calf_len: 0.2,
            gravity: -9.81,
            torque_limit: 33.5,
            friction_mu: 0.7,
            joint_pos_limit: (-2.7, 2.7),
            joint_vel_limit: 21.0,
            standing_height: 0.3,
        }
    }
}

/// Full-order plant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    pub q: VecN,
    pub qd: VecN,
}

impl FullState {
    pub fn new(q: VecN, qd: VecN) -> Self {
        FullState { q, qd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanarLeg {
    Front,
    Back,
}

impl PlanarLeg {
    pub const ALL: [PlanarLeg; 2] = [PlanarLeg::Front, PlanarLeg::Back];

    /// (hip, knee) coordinate indices in q.
    pub fn joint_indices(self) -> (usize, usize) {
        match self {
            PlanarLeg::Front => (3, 4),
            PlanarLeg::Back => (5, 6),
        }
    }
}

/// Which sagittal feet are in contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContactSet {
    pub front: bool,
    pub back: bool,
}

impl ContactSet {
    pub fn both() -> Self {
        ContactSet { front: true, back: true }
    }

    pub fn count(&self) -> usize {
        usize::from(self.front) + usize::from(self.back)
    }

    pub fn active(&self) -> impl Iterator<Item = PlanarLeg> + '_ {
        PlanarLeg::ALL.into_iter().filter(move |l| match l {
            PlanarLeg::Front => self.front,
            PlanarLeg::Back => self.back,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum JointKind {
    PrismaticX,
    PrismaticZ,
    Revolute,
}

impl JointKind {
    fn subspace(self) -> V3 {
        match self {
            JointKind::PrismaticX => V3::new(0.0, 1.0, 0.0),
            JointKind::PrismaticZ => V3::new(0.0, 0.0, 1.0),
            JointKind::Revolute => V3::new(1.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Joint {
    kind: JointKind,
    /// Parent joint index; `None` for the root.
    parent: Option<usize>,
    /// Joint placement in the parent frame.
    offset: Vec2,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub params: ModelParams,
    joints: [Joint; NQ],
    /// Spatial inertia of the body fixed to each joint frame (zero for the
    /// two virtual prismatic carriers).
    inertias: [M3; NQ],
}

impl RobotModel {
    pub fn new(params: ModelParams) -> Self {
        let hx = params.hip_offset_x;
        let lt = params.thigh_len;
        let joints = [
            Joint { kind: JointKind::PrismaticX, parent: None, offset: Vec2::zeros() },
            Joint { kind: JointKind::PrismaticZ, parent: Some(0), offset: Vec2::zeros() },
            Joint { kind: JointKind::Revolute, parent: Some(1), offset: Vec2::zeros() },
            Joint { kind: JointKind::Revolute, parent: Some(2), offset: Vec2::new(hx, 0.0) },
            Joint { kind: JointKind::Revolute, parent: Some(3), offset: Vec2::new(0.0, -lt) },
            Joint { kind: JointKind::Revolute, parent: Some(2), offset: Vec2::new(-hx, 0.0) },
            Joint { kind: JointKind::Revolute, parent: Some(5), offset: Vec2::new(0.0, -lt) },
        ];
        let zero = M3::zeros();
        let body = |l: &LinkParams| spatial_inertia(l.mass, l.com, l.izz);
        let inertias = [
            zero,
            zero,
            body(&params.base),
            body(&params.thigh),
            body(&params.calf),
            body(&params.thigh),
            body(&params.calf),
        ];
        RobotModel { params, joints, inertias }
    }

    pub fn total_mass(&self) -> f64 {
        self.params.base.mass + 2.0 * (self.params.thigh.mass + self.params.calf.mass)
    }

    fn joint_xform(&self, i: usize, qi: f64) -> Xform {
        let j = self.joints[i];
        match j.kind {
            JointKind::PrismaticX => {
                Xform { rot: Mat2::identity(), pos: j.offset + Vec2::new(qi, 0.0) }
            }
            JointKind::PrismaticZ => {
                Xform { rot: Mat2::identity(), pos: j.offset + Vec2::new(0.0, qi) }
            }
            JointKind::Revolute => Xform { rot: rotation(qi), pos: j.offset },
        }
    }

    /// Inverse dynamics: the generalized force that realizes `qdd` at state
    /// (q, qd), gravity included.
    pub fn inverse_dynamics(&self, q: &VecN, qd: &VecN, qdd: &VecN) -> VecN {
        let mut v = [V3::zeros(); NQ];
        let mut a = [V3::zeros(); NQ];
        let mut f = [V3::zeros(); NQ];
        let mut xm = [M3::zeros(); NQ];

        // Gravity enters as a fictitious upward base acceleration.
        let a_root = V3::new(0.0, 0.0, -self.params.gravity);
        for i in 0..NQ {
            let s = self.joints[i].kind.subspace();
            let x = self.joint_xform(i, q[i]).motion_matrix();
            xm[i] = x;
            let (vp, ap) = match self.joints[i].parent {
                Some(p) => (v[p], a[p]),
                None => (V3::zeros(), a_root),
            };
            v[i] = x * vp + s * qd[i];
            a[i] = x * ap + s * qdd[i] + crm(v[i]) * (s * qd[i]);
            f[i] = self.inertias[i] * a[i] + crf(v[i]) * (self.inertias[i] * v[i]);
        }
        let mut tau = VecN::zeros();
        for i in (0..NQ).rev() {
            let s = self.joints[i].kind.subspace();
            tau[i] = s.dot(&f[i]);
            if let Some(p) = self.joints[i].parent {
                let fp = xm[i].transpose() * f[i];
                f[p] += fp;
            }
        }
        tau
    }

    /// Coriolis, centrifugal and gravity forces: inverse dynamics at zero
    /// acceleration.
    pub fn bias_forces(&self, q: &VecN, qd: &VecN) -> VecN {
        self.inverse_dynamics(q, qd, &VecN::zeros())
    }

    /// Joint-space mass matrix by the composite rigid-body algorithm.
    pub fn mass_matrix(&self, q: &VecN) -> MatN {
        let mut xm = [M3::zeros(); NQ];
        let mut ic = self.inertias;
        for (i, x) in xm.iter_mut().enumerate() {
            *x = self.joint_xform(i, q[i]).motion_matrix();
        }
        let mut d = MatN::zeros();
        for i in (0..NQ).rev() {
            if let Some(p) = self.joints[i].parent {
                let xi = xm[i];
                let lifted = xi.transpose() * ic[i] * xi;
                ic[p] += lifted;
            }
            let si = self.joints[i].kind.subspace();
            let mut fh = ic[i] * si;
            d[(i, i)] = si.dot(&fh);
            let mut j = i;
            while let Some(p) = self.joints[j].parent {
                fh = xm[j].transpose() * fh;
                j = p;
                let sj = self.joints[j].kind.subspace();
                d[(i, j)] = sj.dot(&fh);
                d[(j, i)] = d[(i, j)];
            }
        }
        d
    }

    /// Forward dynamics under joint torques (actuated joints only) and
    /// point contact forces at the active feet, ordered front then back.
    pub fn forward_dynamics(
        &self,
        q: &VecN,
        qd: &VecN,
        tau: &VecU,
        contacts: &ContactSet,
        forces: &[Vec2],
    ) -> VecN {
        debug_assert_eq!(forces.len(), contacts.count());
        let d = self.mass_matrix(q);
        let h = self.bias_forces(q, qd);
        let mut rhs = -h;
        for (k, leg) in [PlanarLeg::Front, PlanarLeg::Back].into_iter().enumerate() {
            let (ih, ik) = leg.joint_indices();
            rhs[ih] += tau[2 * k];
            rhs[ik] += tau[2 * k + 1];
        }
        for (f, leg) in forces.iter().zip(contacts.active()) {
            let j = self.foot_jacobian(q, leg);
            for col in 0..NQ {
                rhs[col] += j[(0, col)] * f.x + j[(1, col)] * f.y;
            }
        }
        d.cholesky().expect("mass matrix must be positive definite").solve(&rhs)
    }

    // -- forward kinematics ------------------------------------------------

    pub fn base_pose(q: &VecN) -> (Vec2, f64) {
        (Vec2::new(q[0], q[1]), q[2])
    }

    pub fn hip_position(&self, q: &VecN, leg: PlanarLeg) -> Vec2 {
        let sign = match leg {
            PlanarLeg::Front => 1.0,
            PlanarLeg::Back => -1.0,
        };
        Vec2::new(q[0], q[1]) + rotation(q[2]) * Vec2::new(sign * self.params.hip_offset_x, 0.0)
    }

    pub fn foot_position(&self, q: &VecN, leg: PlanarLeg) -> Vec2 {
        let (ih, ik) = leg.joint_indices();
        let alpha = q[2] + q[ih];
        let beta = alpha + q[ik];
        self.hip_position(q, leg)
            + self.params.thigh_len * leg_dir(alpha)
            + self.params.calf_len * leg_dir(beta)
    }

    /// 2x7 Jacobian of the foot position.
    pub fn foot_jacobian(&self, q: &VecN, leg: PlanarLeg) -> SMatrix<f64, 2, NQ> {
        let (ih, ik) = leg.joint_indices();
        let sign = match leg {
            PlanarLeg::Front => 1.0,
            PlanarLeg::Back => -1.0,
        };
        let alpha = q[2] + q[ih];
        let beta = alpha + q[ik];
        let hip_arm = perp(rotation(q[2]) * Vec2::new(sign * self.params.hip_offset_x, 0.0));
        let dt = self.params.thigh_len * leg_dir_d(alpha);
        let dc = self.params.calf_len * leg_dir_d(beta);
        let mut j = SMatrix::<f64, 2, NQ>::zeros();
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        let d_pitch = hip_arm + dt + dc;
        j.set_column(2, &d_pitch);
        j.set_column(ih, &(dt + dc));
        j.set_column(ik, &dc);
        j
    }

    /// Velocity-product acceleration of the foot, d/dt(J) qd.
    pub fn foot_jacobian_dot_qdot(&self, q: &VecN, qd: &VecN, leg: PlanarLeg) -> Vec2 {
        let (ih, ik) = leg.joint_indices();
        let sign = match leg {
            PlanarLeg::Front => 1.0,
            PlanarLeg::Back => -1.0,
        };
        let alpha = q[2] + q[ih];
        let beta = alpha + q[ik];
        let alpha_d = qd[2] + qd[ih];
        let beta_d = alpha_d + qd[ik];
        let hip_arm = rotation(q[2]) * Vec2::new(sign * self.params.hip_offset_x, 0.0);
        -qd[2] * qd[2] * hip_arm
            + self.params.thigh_len * leg_dir_dd(alpha) * alpha_d * alpha_d
            + self.params.calf_len * leg_dir_dd(beta) * beta_d * beta_d
    }

    pub fn foot_velocity(&self, q: &VecN, qd: &VecN, leg: PlanarLeg) -> Vec2 {
        let v = self.foot_jacobian(q, leg) * qd;
        Vec2::new(v.x, v.y)
    }

    /// Mass-weighted link centers of mass, world coordinates.
    pub fn link_coms(&self, q: &VecN) -> [(f64, Vec2); 5] {
        let base = Vec2::new(q[0], q[1]);
        let rb = rotation(q[2]);
        let mut out = [(0.0, Vec2::zeros()); 5];
        out[0] = (self.params.base.mass, base + rb * self.params.base.com);
        for (slot, leg) in [PlanarLeg::Front, PlanarLeg::Back].into_iter().enumerate() {
            let (ih, ik) = leg.joint_indices();
            let hip = self.hip_position(q, leg);
            let alpha = q[2] + q[ih];
            let beta = alpha + q[ik];
            let knee = hip + self.params.thigh_len * leg_dir(alpha);
            out[1 + 2 * slot] =
                (self.params.thigh.mass, hip + rotation(alpha) * self.params.thigh.com);
            out[2 + 2 * slot] =
                (self.params.calf.mass, knee + rotation(beta) * self.params.calf.com);
        }
        out
    }

    /// Whole-robot center of mass.
    pub fn com_position(&self, q: &VecN) -> Vec2 {
        let coms = self.link_coms(q);
        let m: f64 = coms.iter().map(|(m, _)| m).sum();
        coms.iter().map(|(mi, p)| *mi * p).sum::<Vec2>() / m
    }

    /// Kinetic plus gravitational potential energy.
    pub fn total_energy(&self, q: &VecN, qd: &VecN) -> f64 {
        let kinetic = 0.5 * qd.dot(&(self.mass_matrix(q) * qd));
        let potential: f64 =
            self.link_coms(q).iter().map(|(m, p)| -self.params.gravity * m * p.y).sum();
        kinetic + potential
    }

    // -- contacts ------------------------------------------------------------

    /// Stacked contact Jacobian and drift term for the active feet (front
    /// rows first). `near_singular` warns when a stance knee is straight or
    /// folded, where the leg rows lose rank.
    pub fn contact_jacobian(&self, q: &VecN, qd: &VecN, contacts: &ContactSet) -> ContactJacobian {
        let nc = contacts.count();
        let mut j = DMatrix::zeros(2 * nc, NQ);
        let mut jdot_qdot = DVector::zeros(2 * nc);
        let mut near_singular = false;
        for (k, leg) in contacts.active().enumerate() {
            let jl = self.foot_jacobian(q, leg);
            j.view_mut((2 * k, 0), (2, NQ)).copy_from(&jl);
            let a = self.foot_jacobian_dot_qdot(q, qd, leg);
            jdot_qdot[2 * k] = a.x;
            jdot_qdot[2 * k + 1] = a.y;
            let (_, ik) = leg.joint_indices();
            let det = self.params.thigh_len * self.params.calf_len * q[ik].sin();
            if det.abs() < 1e-6 {
                near_singular = true;
            }
        }
        ContactJacobian { j, jdot_qdot, near_singular }
    }

    // -- inverse kinematics ---------------------------------------------------

    /// Hip and knee angles placing the foot at `foot` (world) given the
    /// base pose inside `q`. `knee_sign` selects the branch; targets out of
    /// reach are clamped to the nearest reachable point and flagged.
    pub fn leg_ik(&self, q: &VecN, foot: Vec2, leg: PlanarLeg, knee_sign: f64) -> IkSolution {
        let hip = self.hip_position(q, leg);
        let lt = self.params.thigh_len;
        let lc = self.params.calf_len;
        let r = foot - hip;
        let dist = r.norm();
        let (dist, clamped) = {
            let lo = (lt - lc).abs().max(1e-9);
            let hi = lt + lc;
            if dist < lo {
                (lo, true)
            } else if dist > hi {
                (hi, true)
            } else {
                (dist, false)
            }
        };
        let cos_knee = ((dist * dist - lt * lt - lc * lc) / (2.0 * lt * lc)).clamp(-1.0, 1.0);
        let knee = knee_sign.signum() * cos_knee.acos();
        // Leg direction angle of r measured like leg_dir: 0 points down.
        let phi = if r.norm() < 1e-12 { 0.0 } else { r.x.atan2(-r.y) };
        let gamma = (lc * knee.sin()).atan2(lt + lc * knee.cos());
        let hip_angle = phi - gamma - q[2];
        IkSolution { hip: hip_angle, knee, clamped }
    }

    /// Nominal standing configuration: base level at the given height,
    /// feet directly below the hips, knees folded backward.
    pub fn standing_config(&self, base_x: f64, height: f64) -> VecN {
        let mut q = VecN::zeros();
        q[0] = base_x;
        q[1] = height;
        for leg in PlanarLeg::ALL {
            let hip = self.hip_position(&q, leg);
            let sol = self.leg_ik(&q, Vec2::new(hip.x, 0.0), leg, -1.0);
            let (ih, ik) = leg.joint_indices();
            q[ih] = sol.hip;
            q[ik] = sol.knee;
        }
        q
    }
}

#[derive(Debug, Clone)]
pub struct ContactJacobian {
    pub j: DMatrix<f64>,
    /// Drift term, d/dt(J_c) qdot.
    pub jdot_qdot: DVector<f64>,
    pub near_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub hip: f64,
    pub knee: f64,
    pub clamped: bool,
}

/// Unit vector of a leg segment at absolute angle `phi`, zero pointing
/// straight down, positive rotating the foot forward.
fn leg_dir(phi: f64) -> Vec2 {
    Vec2::new(phi.sin(), -phi.cos())
}

fn leg_dir_d(phi: f64) -> Vec2 {
    Vec2::new(phi.cos(), phi.sin())
}

fn leg_dir_dd(phi: f64) -> Vec2 {
    Vec2::new(-phi.sin(), phi.cos())
}
