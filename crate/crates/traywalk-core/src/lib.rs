//! Algorithms for safe planar quadruped locomotion around floor openings.
//!
//! The crate covers the full control stack below the perception layer:
//!
//! * [`geometry`] — rectangles, ellipses, hull tests, projections;
//! * [`reduced`] — double-integrator reduced-order base model;
//! * [`cbf`] — control barrier function safety filter over ellipse barriers;
//! * [`foothold`] — minimal-displacement foothold re-planning off a hull;
//! * [`gait`] — trot / quasi-static gait scheduling and Raibert footsteps;
//! * [`qp`] — a dense convex QP solver (operator splitting + polish);
//! * [`rigid`] — planar floating-base rigid-body dynamics (5 links, 7 DOF);
//! * [`wbc`] — whole-body torque controller (QP over accelerations, torques,
//!   contact forces) with smoothed integration and joint impedance;
//! * [`trajopt`] — convex COM transition trajectories across support phases.
//!
//! `no_std` + `alloc` compatible (disable the default `std` feature); the IO,
//! config, and CLI layers live in the companion `traywalk-sim` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod cbf;
pub mod foothold;
pub mod gait;
pub mod geometry;
mod math;
pub mod qp;
pub mod reduced;
pub mod rigid;
pub mod trajopt;
pub mod wbc;

pub use geometry::{Ellipse, RectRegion, Vec2};
