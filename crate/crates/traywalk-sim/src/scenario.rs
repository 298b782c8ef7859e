//! Declarative scenario configuration.
//!
//! A scenario is a TOML file describing the tray geometry, the safety
//! ellipses, the waypoint script, gait and foothold parameters, loop rates,
//! controller gains, and the rigid-body model. Every section has defaults;
//! a minimal file only names the manway and the waypoints. The same struct
//! is embedded verbatim in run logs so a log is self-describing.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use traywalk_core::cbf::{build_ellipse_cbf, ClassKappa, EllipseCbf, FilterConfig, FilterMode};
use traywalk_core::gait::{GaitConfig, Leg};
use traywalk_core::geometry::{ellipse_from_rect, Ellipse, GeometryError, RectRegion};
use traywalk_core::rigid::{LinkParams, ModelParams};
use traywalk_core::wbc::WbcGains;
use traywalk_core::Vec2;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unsupported scenario schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("invalid model: {0}")]
    Model(#[from] traywalk_core::rigid::ModelError),
    #[error("invalid gains: {0}")]
    Gains(#[from] traywalk_core::wbc::WbcError),
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("waypoint list is empty")]
    NoWaypoints,
    #[error("deactivate_filter_after = {index} is out of range ({len} waypoints)")]
    BadDeactivationIndex { index: usize, len: usize },
    #[error("unknown filter mode {0:?} (expected \"kinematic\" or \"extended\")")]
    BadFilterMode(String),
    #[error("extended filter mode requires lambda > 0")]
    MissingLambda,
    #[error("{0} rate ratio must be a positive integer, got {1}")]
    BadRateRatio(&'static str, f64),
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("failed to parse {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

/// Rectangular opening in the tray deck, axis lengths along the local x/y
/// axes before rotation by `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManwaySection {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub theta: f64,
}

/// Ellipse given either by explicit semi-axes or as a scaled fit of the
/// manway rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EllipseSpec {
    Explicit { a: f64, b: f64 },
    Scaled { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySection {
    pub path_ellipse: EllipseSpec,
    pub gait_ellipse: EllipseSpec,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    /// "kinematic" (velocity input) or "extended" (acceleration input).
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Componentwise symmetric input box, omitted = unbounded.
    #[serde(default)]
    pub nu_max: Option<[f64; 2]>,
    /// Master switch, kept for ablation runs. The validator derives the
    /// required-filter window from the waypoint script, not from this flag.
    #[serde(default = "default_true")]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSection {
    pub start: [f64; 2],
    pub list: Vec<[f64; 2]>,
    #[serde(default = "default_waypoint_tolerance")]
    pub tolerance: f64,
    /// Index into `list`; reaching that waypoint switches the safety filter
    /// off for the rest of the run. Omitted = filter stays on.
    #[serde(default)]
    pub deactivate_filter_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerSection {
    pub v_max: f64,
    #[serde(default = "default_planner_kp")]
    pub kp: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitSection {
    #[serde(default = "default_trot_phase")]
    pub trot_phase: f64,
    #[serde(default = "default_qs_phase")]
    pub quasi_static_phase: f64,
    #[serde(default = "default_h_hyst")]
    pub h_hyst: f64,
    #[serde(default = "default_true")]
    pub defer_to_phase_boundary: bool,
    #[serde(default = "default_k_raibert")]
    pub k_raibert: f64,
}

impl Default for GaitSection {
    fn default() -> Self {
        GaitSection {
            trot_phase: default_trot_phase(),
            quasi_static_phase: default_qs_phase(),
            h_hyst: default_h_hyst(),
            defer_to_phase_boundary: true,
            k_raibert: default_k_raibert(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootholdSection {
    /// Relative pushout margin past the manway outline.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Hip-to-foothold reach limit.
    #[serde(default = "default_reach")]
    pub reach: f64,
    /// Hip stations in the base frame: (+-offset_x, +-offset_y).
    #[serde(default = "default_offset_x")]
    pub offset_x: f64,
    #[serde(default = "default_offset_y")]
    pub offset_y: f64,
}

impl Default for FootholdSection {
    fn default() -> Self {
        FootholdSection {
            epsilon: default_epsilon(),
            reach: default_reach(),
            offset_x: default_offset_x(),
            offset_y: default_offset_y(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesSection {
    #[serde(default = "default_planner_hz")]
    pub planner_hz: f64,
    #[serde(default = "default_qp_hz")]
    pub qp_hz: f64,
    #[serde(default = "default_impedance_hz")]
    pub impedance_hz: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            planner_hz: default_planner_hz(),
            qp_hz: default_qp_hz(),
            impedance_hz: default_impedance_hz(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WbcSection {
    #[serde(default = "default_wbc_kp")]
    pub kp: [f64; 7],
    #[serde(default = "default_wbc_kd")]
    pub kd: [f64; 7],
    #[serde(default = "default_kp_imp")]
    pub kp_imp: f64,
    #[serde(default = "default_kd_imp")]
    pub kd_imp: f64,
    #[serde(default = "default_w_qdd")]
    pub w_qdd: f64,
    #[serde(default)]
    pub w_u: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_baumgarte_omega")]
    pub baumgarte_omega: f64,
    #[serde(default = "default_baumgarte_zeta")]
    pub baumgarte_zeta: f64,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
}

impl Default for WbcSection {
    fn default() -> Self {
        WbcSection {
            kp: default_wbc_kp(),
            kd: default_wbc_kd(),
            kp_imp: default_kp_imp(),
            kd_imp: default_kd_imp(),
            w_qdd: default_w_qdd(),
            w_u: 0.0,
            gamma: default_gamma(),
            baumgarte_omega: default_baumgarte_omega(),
            baumgarte_zeta: default_baumgarte_zeta(),
            qp_tol: default_qp_tol(),
        }
    }
}

/// Flat mirror of the rigid-body model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(default = "default_base_mass")]
    pub base_mass: f64,
    #[serde(default = "default_base_izz")]
    pub base_izz: f64,
    #[serde(default = "default_thigh_mass")]
    pub thigh_mass: f64,
    #[serde(default = "default_segment_com_y")]
    pub thigh_com_y: f64,
    #[serde(default = "default_thigh_izz")]
    pub thigh_izz: f64,
    #[serde(default = "default_calf_mass")]
    pub calf_mass: f64,
    #[serde(default = "default_segment_com_y")]
    pub calf_com_y: f64,
    #[serde(default = "default_calf_izz")]
    pub calf_izz: f64,
    #[serde(default = "default_hip_offset_x")]
    pub hip_offset_x: f64,
    #[serde(default = "default_segment_len")]
    pub thigh_len: f64,
    #[serde(default = "default_segment_len")]
    pub calf_len: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_torque_limit")]
    pub torque_limit: f64,
    #[serde(default = "default_friction_mu")]
    pub friction_mu: f64,
    #[serde(default = "default_joint_pos_limit")]
    pub joint_pos_limit: [f64; 2],
    #[serde(default = "default_joint_vel_limit")]
    pub joint_vel_limit: f64,
    #[serde(default = "default_standing_height")]
    pub standing_height: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            base_mass: default_base_mass(),
            base_izz: default_base_izz(),
            thigh_mass: default_thigh_mass(),
            thigh_com_y: default_segment_com_y(),
            thigh_izz: default_thigh_izz(),
            calf_mass: default_calf_mass(),
            calf_com_y: default_segment_com_y(),
            calf_izz: default_calf_izz(),
            hip_offset_x: default_hip_offset_x(),
            thigh_len: default_segment_len(),
            calf_len: default_segment_len(),
            gravity: default_gravity(),
            torque_limit: default_torque_limit(),
            friction_mu: default_friction_mu(),
            joint_pos_limit: default_joint_pos_limit(),
            joint_vel_limit: default_joint_vel_limit(),
            standing_height: default_standing_height(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub manway: ManwaySection,
    pub safety: SafetySection,
    pub waypoints: WaypointSection,
    pub planner: PlannerSection,
    #[serde(default)]
    pub gait: GaitSection,
    #[serde(default)]
    pub foothold: FootholdSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub wbc: WbcSection,
    #[serde(default)]
    pub model: ModelSection,
}

fn default_alpha0() -> f64 {
    1.0
}
fn default_mode() -> String {
    "kinematic".into()
}
fn default_true() -> bool {
    true
}
fn default_waypoint_tolerance() -> f64 {
    0.03
}
fn default_planner_kp() -> f64 {
    2.0
}
fn default_trot_phase() -> f64 {
    0.3
}
fn default_qs_phase() -> f64 {
    0.5
}
fn default_h_hyst() -> f64 {
    0.05
}
fn default_k_raibert() -> f64 {
    0.03
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_reach() -> f64 {
    0.3
}
fn default_offset_x() -> f64 {
    0.18
}
fn default_offset_y() -> f64 {
    0.12
}
fn default_planner_hz() -> f64 {
    100.0
}
fn default_qp_hz() -> f64 {
    1000.0
}
fn default_impedance_hz() -> f64 {
    8000.0
}
fn default_wbc_kp() -> [f64; 7] {
    [40.0, 40.0, 60.0, 100.0, 100.0, 100.0, 100.0]
}
fn default_wbc_kd() -> [f64; 7] {
    [12.0, 12.0, 15.0, 10.0, 10.0, 10.0, 10.0]
}
fn default_kp_imp() -> f64 {
    20.0
}
fn default_kd_imp() -> f64 {
    0.5
}
fn default_w_qdd() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.5
}
fn default_baumgarte_omega() -> f64 {
    50.0
}
fn default_baumgarte_zeta() -> f64 {
    1.0
}
fn default_qp_tol() -> f64 {
    1e-8
}
fn default_base_mass() -> f64 {
    10.0
}
fn default_base_izz() -> f64 {
    10.0 * (0.36 * 0.36 + 0.1 * 0.1) / 12.0
}
fn default_thigh_mass() -> f64 {
    0.8
}
fn default_segment_com_y() -> f64 {
    -0.1
}
fn default_thigh_izz() -> f64 {
    0.8 * 0.04 / 12.0
}
fn default_calf_mass() -> f64 {
    0.2
}
fn default_calf_izz() -> f64 {
    0.2 * 0.04 / 12.0
}
fn default_hip_offset_x() -> f64 {
    0.18
}
fn default_segment_len() -> f64 {
    0.2
}
fn default_gravity() -> f64 {
    -9.81
}
fn default_torque_limit() -> f64 {
    33.5
}
fn default_friction_mu() -> f64 {
    0.7
}
fn default_joint_pos_limit() -> [f64; 2] {
    [-2.7, 2.7]
}
fn default_joint_vel_limit() -> f64 {
    21.0
}
fn default_standing_height() -> f64 {
    0.3
}

pub fn vec2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

impl ManwaySection {
    pub fn region(&self) -> Result<RectRegion, GeometryError> {
        RectRegion::new(vec2(self.center), self.width, self.height, self.theta)
    }
}

impl EllipseSpec {
    pub fn resolve(&self, manway: &RectRegion) -> Result<Ellipse, GeometryError> {
        match *self {
            EllipseSpec::Explicit { a, b } => {
                let (v1, v2) = manway.edge(0);
                let e = v2 - v1;
                Ellipse::new(manway.centroid(), a, b, e.y.atan2(e.x))
            }
            EllipseSpec::Scaled { beta } => ellipse_from_rect(manway, beta),
        }
    }
}

impl SafetySection {
    pub fn filter_mode(&self) -> Result<FilterMode, ScenarioError> {
        match self.mode.as_str() {
            "kinematic" => Ok(FilterMode::Kinematic),
            "extended" => match self.lambda {
                Some(l) if l > 0.0 => Ok(FilterMode::Extended { lambda: l }),
                _ => Err(ScenarioError::MissingLambda),
            },
            other => Err(ScenarioError::BadFilterMode(other.to_string())),
        }
    }

    pub fn filter_config(&self) -> Result<FilterConfig, ScenarioError> {
        let bounds = self.nu_max.map(|m| (Vec2::new(-m[0], -m[1]), Vec2::new(m[0], m[1])));
        Ok(FilterConfig {
            alpha: ClassKappa::Linear { alpha0: self.alpha0 },
            mode: self.filter_mode()?,
            bounds,
            ..FilterConfig::default()
        })
    }
}

impl GaitSection {
    pub fn config(&self) -> GaitConfig {
        GaitConfig {
            trot_phase: self.trot_phase,
            quasi_static_phase: self.quasi_static_phase,
            h_hyst: self.h_hyst,
            defer_to_phase_boundary: self.defer_to_phase_boundary,
            k_raibert: self.k_raibert,
        }
    }
}

impl FootholdSection {
    /// Hip station of a leg in the ground plane relative to the base.
    pub fn hip_offset(&self, leg: Leg) -> Vec2 {
        let sx = match leg {
            Leg::FL | Leg::FR => 1.0,
            Leg::BL | Leg::BR => -1.0,
        };
        let sy = match leg {
            Leg::FL | Leg::BL => 1.0,
            Leg::FR | Leg::BR => -1.0,
        };
        Vec2::new(sx * self.offset_x, sy * self.offset_y)
    }
}

impl WbcSection {
    pub fn gains(&self) -> WbcGains {
        use nalgebra::SVector;
        WbcGains {
            kp: SVector::from_row_slice(&self.kp),
            kd: SVector::from_row_slice(&self.kd),
            kp_imp: SVector::from_element(self.kp_imp),
            kd_imp: SVector::from_element(self.kd_imp),
            w_qdd: SVector::from_element(self.w_qdd),
            w_u: SVector::from_element(self.w_u),
            gamma: self.gamma,
            baumgarte_omega: self.baumgarte_omega,
            baumgarte_zeta: self.baumgarte_zeta,
            qp_tol: self.qp_tol,
            ..WbcGains::default()
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            base: LinkParams {
                mass: self.base_mass,
                com: Vec2::zeros(),
                izz: self.base_izz,
            },
            thigh: LinkParams {
                mass: self.thigh_mass,
                com: Vec2::new(0.0, self.thigh_com_y),
                izz: self.thigh_izz,
            },
            calf: LinkParams {
                mass: self.calf_mass,
                com: Vec2::new(0.0, self.calf_com_y),
                izz: self.calf_izz,
            },
            hip_offset_x: self.hip_offset_x,
            thigh_len: self.thigh_len,
            calf_len: self.calf_len,
            gravity: self.gravity,
            torque_limit: self.torque_limit,
            friction_mu: self.friction_mu,
            joint_pos_limit: (self.joint_pos_limit[0], self.joint_pos_limit[1]),
            joint_vel_limit: self.joint_vel_limit,
            standing_height: self.standing_height,
        }
    }
}

/// Resolved, validated scenario pieces the harness consumes.
pub struct ResolvedScenario {
    pub manway: RectRegion,
    pub path_cbf: EllipseCbf,
    pub gait_cbf: EllipseCbf,
    pub filter: FilterConfig,
    pub gait: GaitConfig,
    pub model: ModelParams,
    pub gains: WbcGains,
    /// WBC ticks per planner tick.
    pub qp_per_planner: usize,
    /// Impedance substeps per WBC tick.
    pub imp_per_qp: usize,
    pub planner_dt: f64,
    pub ticks: usize,
}

fn integer_ratio(name: &'static str, num: f64, den: f64) -> Result<usize, ScenarioError> {
    let ratio = num / den;
    let rounded = ratio.round();
    if !(rounded >= 1.0) || (ratio - rounded).abs() > 1e-9 {
        return Err(ScenarioError::BadRateRatio(name, ratio));
    }
    Ok(rounded as usize)
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: origin.to_string(),
            source,
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.resolve().map(|_| ())
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion {
                found: self.schema_version,
                expected: SCENARIO_SCHEMA_VERSION,
            });
        }
        if self.waypoints.list.is_empty() {
            return Err(ScenarioError::NoWaypoints);
        }
        if let Some(idx) = self.waypoints.deactivate_filter_after {
            if idx >= self.waypoints.list.len() {
                return Err(ScenarioError::BadDeactivationIndex {
                    index: idx,
                    len: self.waypoints.list.len(),
                });
            }
        }
        let positive = [
            ("waypoints.tolerance", self.waypoints.tolerance),
            ("planner.v_max", self.planner.v_max),
            ("planner.kp", self.planner.kp),
            ("planner.duration", self.planner.duration),
            ("safety.alpha0", self.safety.alpha0),
            ("gait.trot_phase", self.gait.trot_phase),
            ("gait.quasi_static_phase", self.gait.quasi_static_phase),
            ("foothold.epsilon", self.foothold.epsilon),
            ("foothold.reach", self.foothold.reach),
            ("rates.planner_hz", self.rates.planner_hz),
            ("rates.qp_hz", self.rates.qp_hz),
            ("rates.impedance_hz", self.rates.impedance_hz),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ScenarioError::NonPositive { field, value });
            }
        }
        if self.gait.h_hyst < 0.0 {
            return Err(ScenarioError::NonPositive {
                field: "gait.h_hyst",
                value: self.gait.h_hyst,
            });
        }
        let manway = self.manway.region()?;
        let path_cbf = build_ellipse_cbf(&self.safety.path_ellipse.resolve(&manway)?);
        let gait_cbf = build_ellipse_cbf(&self.safety.gait_ellipse.resolve(&manway)?);
        let filter = self.safety.filter_config()?;
        let model = self.model.params();
        model.validate()?;
        let gains = self.wbc.gains();
        gains.validate()?;
        let qp_per_planner =
            integer_ratio("qp_hz / planner_hz", self.rates.qp_hz, self.rates.planner_hz)?;
        let imp_per_qp =
            integer_ratio("impedance_hz / qp_hz", self.rates.impedance_hz, self.rates.qp_hz)?;
        let planner_dt = 1.0 / self.rates.planner_hz;
        let ticks = (self.planner.duration * self.rates.planner_hz).round() as usize;
        Ok(ResolvedScenario {
            manway,
            path_cbf,
            gait_cbf,
            filter,
            gait: self.gait.config(),
            model,
            gains,
            qp_per_planner,
            imp_per_qp,
            planner_dt,
            ticks,
        })
    }

    /// Tray-crossing scenario: skirt the manway opening, park on its center.
    /// Geometry matches the hardware layout this stack was sized for.
    pub fn manway_crossing() -> Self {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: "manway-crossing".into(),
            manway: ManwaySection {
                center: [0.5, 0.0],
                width: 0.381,
                height: 0.56,
                theta: 0.0,
            },
            safety: SafetySection {
                path_ellipse: EllipseSpec::Explicit { a: 0.19, b: 0.31 },
                gait_ellipse: EllipseSpec::Explicit { a: 0.49, b: 0.88 },
                alpha0: 1.0,
                mode: "kinematic".into(),
                lambda: None,
                nu_max: None,
                enabled: true,
            },
            waypoints: WaypointSection {
                start: [0.0, 0.0],
                list: vec![[0.8, -0.25], [0.5, 0.0]],
                tolerance: 0.03,
                deactivate_filter_after: Some(0),
            },
            planner: PlannerSection { v_max: 0.05, kp: 2.0, duration: 60.0 },
            gait: GaitSection::default(),
            foothold: FootholdSection::default(),
            rates: RatesSection::default(),
            wbc: WbcSection::default(),
            model: ModelSection::default(),
        }
    }

    /// Standing hold: goal equals start, used for dynamic-plant acceptance.
    pub fn standing_hold(duration: f64) -> Self {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: "standing-hold".into(),
            manway: ManwaySection {
                center: [2.0, 0.0],
                width: 0.381,
                height: 0.56,
                theta: 0.0,
            },
            safety: SafetySection {
                path_ellipse: EllipseSpec::Explicit { a: 0.19, b: 0.31 },
                gait_ellipse: EllipseSpec::Explicit { a: 0.49, b: 0.88 },
                alpha0: 1.0,
                mode: "kinematic".into(),
                lambda: None,
                nu_max: None,
                enabled: true,
            },
            waypoints: WaypointSection {
                start: [0.0, 0.0],
                list: vec![[0.0, 0.0]],
                tolerance: 0.03,
                deactivate_filter_after: None,
            },
            planner: PlannerSection { v_max: 0.05, kp: 2.0, duration },
            gait: GaitSection::default(),
            foothold: FootholdSection::default(),
            rates: RatesSection::default(),
            wbc: WbcSection::default(),
            model: ModelSection::default(),
        }
    }
}
