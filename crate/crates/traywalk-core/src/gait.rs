//! Gait selection and phase scheduling.
//!
//! The gait is selected from the gait-region barrier value: non-negative
//! means the torso is far enough from the opening for a trot, negative
//! demands the quasi-static crawl. A hysteresis band (re-enter trot only
//! above `h_hyst`) stops chattering near the boundary, and switches are by
//! default deferred to the next phase boundary so a swing leg is never
//! retargeted mid-flight.
//!
//! Phase tables:
//! - quasi-static: one swing leg per phase, FL, BR, FR, BL, 0.5 s each
//!   (three legs always in stance);
//! - trot: diagonal pairs FL+BR then FR+BL, 0.3 s each.

use alloc::vec::Vec;

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitType {
    Trot,
    QuasiStatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    FL = 0,
    FR = 1,
    BL = 2,
    BR = 3,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::FL, Leg::FR, Leg::BL, Leg::BR];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitConfig {
    /// Trot phase duration in seconds.
    pub trot_phase: f64,
    /// Quasi-static phase duration in seconds.
    pub quasi_static_phase: f64,
    /// Barrier value required to re-enter trot after a crawl.
    pub h_hyst: f64,
    /// Defer gait switches to the next phase boundary instead of switching
    /// on the tick the selection changes.
    pub defer_to_phase_boundary: bool,
    /// Feedback gain of the footstep heuristic.
    pub k_raibert: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            trot_phase: 0.3,
            quasi_static_phase: 0.5,
            h_hyst: 0.05,
            defer_to_phase_boundary: true,
            k_raibert: 0.03,
        }
    }
}

const QS_SWING: [&[Leg]; 4] = [&[Leg::FL], &[Leg::BR], &[Leg::FR], &[Leg::BL]];
const TROT_SWING: [&[Leg]; 2] = [&[Leg::FL, Leg::BR], &[Leg::FR, Leg::BL]];

pub fn num_phases(gait: GaitType) -> usize {
    match gait {
        GaitType::Trot => 2,
        GaitType::QuasiStatic => 4,
    }
}

pub fn phase_duration(gait: GaitType, cfg: &GaitConfig) -> f64 {
    match gait {
        GaitType::Trot => cfg.trot_phase,
        GaitType::QuasiStatic => cfg.quasi_static_phase,
    }
}

/// Legs in swing for the given phase.
pub fn swing_legs(gait: GaitType, phase: usize) -> &'static [Leg] {
    match gait {
        GaitType::Trot => TROT_SWING[phase % 2],
        GaitType::QuasiStatic => QS_SWING[phase % 4],
    }
}

/// Legs in stance for the given phase (complement of the swing set).
pub fn stance_legs(gait: GaitType, phase: usize) -> Vec<Leg> {
    let swing = swing_legs(gait, phase);
    Leg::ALL.iter().copied().filter(|l| !swing.contains(l)).collect()
}

/// Memoryless gait selection: trot if and only if the barrier is
/// non-negative.
pub fn select_gait_raw(h_gait: f64) -> GaitType {
    if h_gait >= 0.0 {
        GaitType::Trot
    } else {
        GaitType::QuasiStatic
    }
}

/// Gait selection with hysteresis around the raw rule. Leaving trot still
/// happens at h < 0; re-entering requires h > h_hyst.
pub fn select_gait(h_gait: f64, current: GaitType, cfg: &GaitConfig) -> GaitType {
    match current {
        GaitType::Trot => {
            if h_gait < 0.0 {
                GaitType::QuasiStatic
            } else {
                GaitType::Trot
            }
        }
        GaitType::QuasiStatic => {
            if h_gait > cfg.h_hyst {
                GaitType::Trot
            } else {
                GaitType::QuasiStatic
            }
        }
    }
}

/// A phase boundary produced by [`GaitState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTransition {
    /// Gait active after the boundary.
    pub gait: GaitType,
    /// New phase index.
    pub phase: usize,
    /// Whether this boundary also switched gaits.
    pub switched_gait: bool,
}

impl PhaseTransition {
    pub fn new_swing(&self) -> &'static [Leg] {
        swing_legs(self.gait, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitState {
    pub active: GaitType,
    pub phase: usize,
    pub phase_elapsed: f64,
    /// Gait to adopt at the next phase boundary, when deferral is on.
    pub pending: Option<GaitType>,
}

impl GaitState {
    pub fn new(initial: GaitType) -> Self {
        GaitState { active: initial, phase: 0, phase_elapsed: 0.0, pending: None }
    }

    /// Advances the phase clock by `dt` with `selected` as the currently
    /// requested gait. Returns every phase boundary crossed, in order.
    pub fn step(&mut self, dt: f64, selected: GaitType, cfg: &GaitConfig) -> Vec<PhaseTransition> {
        let mut transitions = Vec::new();
        if selected != self.active {
            if cfg.defer_to_phase_boundary {
                self.pending = Some(selected);
            } else {
                // Immediate switch: this tick is a phase boundary of the
                // new gait.
                self.active = selected;
                self.phase = 0;
                self.phase_elapsed = 0.0;
                self.pending = None;
                transitions.push(PhaseTransition {
                    gait: self.active,
                    phase: 0,
                    switched_gait: true,
                });
            }
        } else {
            self.pending = None;
        }

        self.phase_elapsed += dt;
        while self.phase_elapsed >= phase_duration(self.active, cfg) {
            self.phase_elapsed -= phase_duration(self.active, cfg);
            match self.pending.take() {
                Some(next) => {
                    self.active = next;
                    self.phase = 0;
                    transitions.push(PhaseTransition {
                        gait: next,
                        phase: 0,
                        switched_gait: true,
                    });
                }
                None => {
                    self.phase = (self.phase + 1) % num_phases(self.active);
                    transitions.push(PhaseTransition {
                        gait: self.active,
                        phase: self.phase,
                        switched_gait: false,
                    });
                }
            }
        }
        transitions
    }
}

/// Footstep target for a swing leg: half a stance period of dead reckoning
/// plus velocity-error feedback.
pub fn raibert_footstep(
    hip: Vec2,
    velocity: Vec2,
    commanded_velocity: Vec2,
    stance_duration: f64,
    k: f64,
) -> Vec2 {
    hip + 0.5 * stance_duration * velocity + k * (velocity - commanded_velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quasi_static_cycle_order_and_stance_count() {
        let cfg = GaitConfig::default();
        let mut st = GaitState::new(GaitType::QuasiStatic);
        let mut seen = Vec::new();
        seen.push(swing_legs(st.active, st.phase)[0]);
        for _ in 0..2000 {
            for t in st.step(1e-3, GaitType::QuasiStatic, &cfg) {
                assert!(!t.switched_gait);
                assert_eq!(t.new_swing().len(), 1);
                seen.push(t.new_swing()[0]);
            }
            assert_eq!(stance_legs(st.active, st.phase).len(), 3);
        }
        // 2 s at 0.5 s per phase: one full cycle back to FL.
        assert_eq!(seen, [Leg::FL, Leg::BR, Leg::FR, Leg::BL, Leg::FL]);
    }

    #[test]
    fn trot_alternates_diagonal_pairs() {
        let cfg = GaitConfig::default();
        let mut st = GaitState::new(GaitType::Trot);
        let mut boundaries = 0;
        for _ in 0..1200 {
            for t in st.step(1e-3, GaitType::Trot, &cfg) {
                boundaries += 1;
                let expect: &[Leg] = if t.phase == 0 {
                    &[Leg::FL, Leg::BR]
                } else {
                    &[Leg::FR, Leg::BL]
                };
                assert_eq!(t.new_swing(), expect);
            }
            assert_eq!(stance_legs(st.active, st.phase).len(), 2);
        }
        assert_eq!(boundaries, 4); // 1.2 s / 0.3 s
    }

    #[test]
    fn raw_selection_threshold() {
        assert_eq!(select_gait_raw(0.0), GaitType::Trot);
        assert_eq!(select_gait_raw(1e-12), GaitType::Trot);
        assert_eq!(select_gait_raw(-1e-12), GaitType::QuasiStatic);
    }

    #[test]
    fn hysteresis_band_keeps_current_gait() {
        let cfg = GaitConfig::default();
        assert_eq!(select_gait(0.02, GaitType::Trot, &cfg), GaitType::Trot);
        assert_eq!(select_gait(-0.01, GaitType::Trot, &cfg), GaitType::QuasiStatic);
        // Inside the band the crawl persists.
        assert_eq!(select_gait(0.02, GaitType::QuasiStatic, &cfg), GaitType::QuasiStatic);
        assert_eq!(select_gait(0.05, GaitType::QuasiStatic, &cfg), GaitType::QuasiStatic);
        assert_eq!(select_gait(0.051, GaitType::QuasiStatic, &cfg), GaitType::Trot);
    }

    #[test]
    fn deferred_switch_waits_for_phase_boundary() {
        let cfg = GaitConfig::default();
        let mut st = GaitState::new(GaitType::Trot);
        // 0.1 s into the phase the selection flips to quasi-static.
        for _ in 0..100 {
            assert!(st.step(1e-3, GaitType::Trot, &cfg).is_empty());
        }
        let mut switch_time = None;
        for k in 0..400 {
            for t in st.step(1e-3, GaitType::QuasiStatic, &cfg) {
                assert!(t.switched_gait);
                assert_eq!(t.gait, GaitType::QuasiStatic);
                assert_eq!(t.phase, 0);
                assert_eq!(t.new_swing(), &[Leg::FL]);
                switch_time = Some(0.1 + (k + 1) as f64 * 1e-3);
            }
            if switch_time.is_some() {
                break;
            }
            assert_eq!(st.active, GaitType::Trot);
        }
        // The boundary lands at the trot phase end, 0.3 s.
        assert_relative_eq!(switch_time.unwrap(), 0.3, epsilon = 1e-9);
    }

    #[test]
    fn immediate_switch_is_a_phase_boundary() {
        let cfg = GaitConfig { defer_to_phase_boundary: false, ..GaitConfig::default() };
        let mut st = GaitState::new(GaitType::Trot);
        for _ in 0..50 {
            st.step(1e-3, GaitType::Trot, &cfg);
        }
        let ts = st.step(1e-3, GaitType::QuasiStatic, &cfg);
        assert_eq!(ts.len(), 1);
        assert!(ts[0].switched_gait);
        assert_eq!(st.active, GaitType::QuasiStatic);
        assert_eq!(st.phase, 0);
        assert!(st.phase_elapsed < 2e-3);
    }

    #[test]
    fn pending_switch_cancels_if_selection_returns() {
        let cfg = GaitConfig::default();
        let mut st = GaitState::new(GaitType::Trot);
        st.step(1e-3, GaitType::QuasiStatic, &cfg);
        assert_eq!(st.pending, Some(GaitType::QuasiStatic));
        st.step(1e-3, GaitType::Trot, &cfg);
        assert_eq!(st.pending, None);
        // Ride out the rest of the phase: no switch happens.
        for _ in 0..400 {
            for t in st.step(1e-3, GaitType::Trot, &cfg) {
                assert!(!t.switched_gait);
            }
        }
        assert_eq!(st.active, GaitType::Trot);
    }

    #[test]
    fn large_dt_crosses_multiple_boundaries() {
        let cfg = GaitConfig::default();
        let mut st = GaitState::new(GaitType::Trot);
        let ts = st.step(0.95, GaitType::Trot, &cfg);
        assert_eq!(ts.len(), 3); // boundaries at 0.3, 0.6, 0.9
        assert_eq!(st.phase, 1);
        assert_relative_eq!(st.phase_elapsed, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn footstep_heuristic_formula() {
        let hip = Vec2::new(0.4, 0.1);
        let v = Vec2::new(0.2, -0.1);
        let v_cmd = Vec2::new(0.3, 0.0);
        let p = raibert_footstep(hip, v, v_cmd, 0.3, 0.03);
        assert_relative_eq!(p.x, 0.4 + 0.15 * 0.2 + 0.03 * (-0.1), epsilon = 1e-15);
        assert_relative_eq!(p.y, 0.1 + 0.15 * (-0.1) + 0.03 * (-0.1), epsilon = 1e-15);
        // Tracking the command exactly leaves pure dead reckoning.
        let p0 = raibert_footstep(hip, v_cmd, v_cmd, 0.4, 0.03);
        assert_relative_eq!(p0, hip + 0.2 * v_cmd, epsilon = 1e-15);
    }
}
