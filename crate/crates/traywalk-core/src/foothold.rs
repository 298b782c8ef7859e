//! Minimal-displacement foothold re-planning off a rectangular opening.
//!
//! A planned foothold landing inside the opening is moved out along the
//! shortest direction: locate the quadrant of the rectangle the foothold is
//! in, project onto the nearer of the two outline edges adjacent to that
//! quadrant's corner, and push past the boundary by a relative margin
//! `epsilon`:
//!
//! ```text
//!   x_safe = x_f + (1 + epsilon) (x_proj - x_f)
//! ```
//!
//! If the hip cannot reach the primary candidate, the projection onto the
//! other adjacent edge is tried; if that also fails the caller keeps the
//! current stance (an explicit error, never a silent unsafe foothold).

use crate::geometry::{hull_contains, project_to_segment, RectRegion, Vec2};

/// One replanning request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootholdQuery {
    /// Planned foothold (from the footstep planner).
    pub foothold: Vec2,
    /// Hip position of the leg, for the reachability check.
    pub hip: Vec2,
    /// Maximum distance from hip to an admissible foothold.
    pub reach: f64,
    /// Relative pushout margin (> 0), 0.1 by default upstream.
    pub epsilon: f64,
}

/// Details of an executed re-plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanDetail {
    /// Projection of the planned foothold onto the chosen outline edge.
    pub projection: Vec2,
    /// Sub-region index (0..4) the planned foothold was in.
    pub subregion: usize,
    /// Edge index (0..4) of the rectangle the foothold was pushed across.
    pub edge: usize,
    /// Whether the reach check forced the second adjacent edge.
    pub used_fallback_edge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanResult {
    /// Safe foothold to execute.
    pub foothold: Vec2,
    /// `None` when the planned foothold was already outside the opening.
    pub detail: Option<ReplanDetail>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FootholdError {
    /// Both adjacent-edge candidates violate the hip reach; the caller
    /// should keep the current stance.
    Unreachable { planned: Vec2, candidates: [Vec2; 2] },
    /// The pushout margin must be strictly positive.
    InvalidEpsilon { epsilon: f64 },
}

impl core::fmt::Display for FootholdError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FootholdError::Unreachable { planned, .. } => write!(
                f,
                "no reachable safe foothold for planned ({}, {})",
                planned.x, planned.y
            ),
            FootholdError::InvalidEpsilon { epsilon } => {
                write!(f, "pushout margin must be positive, got {epsilon}")
            }
        }
    }
}

impl core::error::Error for FootholdError {}

/// Quadrant of the rectangle containing `point`, 0..4, indexed like the
/// vertices (sub-region `i` owns corner `i`). Boundary ties resolve to the
/// lowest index. Intended for points inside the hull; outside points are
/// classified by the same half-plane splits.
pub fn locate_subregion(rect: &RectRegion, point: Vec2) -> usize {
    let [v1, v2, v3, _] = *rect.vertices();
    let u = v2 - v1;
    let w = v3 - v2;
    let tu = u.dot(&(point - v1)) / u.dot(&u);
    let tw = w.dot(&(point - v2)) / w.dot(&w);
    // Checked in index order so that ties pick the lowest index.
    if tu <= 0.5 && tw <= 0.5 {
        0
    } else if tu >= 0.5 && tw <= 0.5 {
        1
    } else if tu >= 0.5 {
        2
    } else {
        3
    }
}

/// Projects `point` onto the nearer of the two rectangle edges adjacent to
/// the corner of its sub-region. Distance ties resolve to the edge arriving
/// at that corner (the lower-index neighbor).
pub fn project_to_boundary(rect: &RectRegion, point: Vec2) -> (Vec2, ReplanDetail) {
    let subregion = locate_subregion(rect, point);
    let edge_prev = (subregion + 3) % 4;
    let edge_next = subregion;
    let (pa, pb) = rect.edge(edge_prev);
    let (na, nb) = rect.edge(edge_next);
    let proj_prev = project_to_segment(point, pa, pb);
    let proj_next = project_to_segment(point, na, nb);
    let (projection, edge) = if (point - proj_prev).norm_squared() <= (point - proj_next).norm_squared() {
        (proj_prev, edge_prev)
    } else {
        (proj_next, edge_next)
    };
    (projection, ReplanDetail { projection, subregion, edge, used_fallback_edge: false })
}

/// Re-plans a foothold away from the opening (identity when already safe).
pub fn replan(rect: &RectRegion, query: &FootholdQuery) -> Result<ReplanResult, FootholdError> {
    if !(query.epsilon > 0.0) {
        return Err(FootholdError::InvalidEpsilon { epsilon: query.epsilon });
    }
    if !hull_contains(rect, query.foothold) {
        return Ok(ReplanResult { foothold: query.foothold, detail: None });
    }
    let (primary, mut detail) = project_to_boundary(rect, query.foothold);
    // The other edge adjacent to the same corner.
    let fallback_edge = if detail.edge == detail.subregion {
        (detail.subregion + 3) % 4
    } else {
        detail.subregion
    };
    let (fa, fb) = rect.edge(fallback_edge);
    let fallback = project_to_segment(query.foothold, fa, fb);

    let push = |proj: Vec2| query.foothold + (1.0 + query.epsilon) * (proj - query.foothold);
    let primary_safe = push(primary);
    if (primary_safe - query.hip).norm() <= query.reach {
        return Ok(ReplanResult { foothold: primary_safe, detail: Some(detail) });
    }
    let fallback_safe = push(fallback);
    if (fallback_safe - query.hip).norm() <= query.reach {
        detail.projection = fallback;
        detail.edge = fallback_edge;
        detail.used_fallback_edge = true;
        return Ok(ReplanResult { foothold: fallback_safe, detail: Some(detail) });
    }
    Err(FootholdError::Unreachable {
        planned: query.foothold,
        candidates: [primary_safe, fallback_safe],
    })
}
