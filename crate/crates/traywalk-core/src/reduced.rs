//! Reduced-order base model: a planar double integrator.
//!
//! The base position `phi` in the horizontal plane obeys `phi_ddot = nu`.
//! This is the model the safety filter reasons about. Two readings of the
//! input are used downstream: the dynamic one (`nu` is an acceleration, this
//! module's [`step`]) and the kinematic one (`nu` is a velocity command,
//! [`step_kinematic`]), which is how the filter is run by default since the
//! barrier depends on position only.

use crate::geometry::Vec2;

/// Base state of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub pos: Vec2,
    pub vel: Vec2,
}

impl ReducedState {
    pub fn at_rest(pos: Vec2) -> Self {
        Self { pos, vel: Vec2::zeros() }
    }
}

/// Proportional-derivative gains for the nominal tracking controller,
/// applied componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: Vec2,
    pub kd: Vec2,
}

impl PdGains {
    pub fn uniform(kp: f64, kd: f64) -> Self {
        Self { kp: Vec2::new(kp, kp), kd: Vec2::new(kd, kd) }
    }
}

/// Continuous-time state derivative `(phi_dot, nu)`.
pub fn dynamics(state: &ReducedState, nu: Vec2) -> (Vec2, Vec2) {
    (state.vel, nu)
}

/// Exact discrete step under a zero-order-held input:
/// `pos' = pos + vel dt + nu dt^2 / 2`, `vel' = vel + nu dt`.
pub fn step(state: &ReducedState, nu: Vec2, dt: f64) -> ReducedState {
    ReducedState {
        pos: state.pos + state.vel * dt + nu * (0.5 * dt * dt),
        vel: state.vel + nu * dt,
    }
}

/// Kinematic reading: `nu` is a velocity command followed exactly.
pub fn step_kinematic(pos: Vec2, nu: Vec2, dt: f64) -> Vec2 {
    pos + nu * dt
}

/// Nominal PD tracking command
/// `nu_d = Kp (target_pos - pos) + Kd (target_vel - vel)`.
pub fn nominal_controller(
    state: &ReducedState,
    target_pos: Vec2,
    target_vel: Vec2,
    gains: &PdGains,
) -> Vec2 {
    let ep = target_pos - state.pos;
    let ev = target_vel - state.vel;
    Vec2::new(
        gains.kp.x * ep.x + gains.kd.x * ev.x,
        gains.kp.y * ep.y + gains.kd.y * ev.y,
    )
}
