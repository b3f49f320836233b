//! Declarative scenario description, parsed from TOML.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec3};
use crate::netsim::{ChannelConfig, Instability};
use crate::statechain::NeckModel;
use crate::world::{CameraModel, SceneBox, SceneModel, ScenePlane};

/// A problem with a scenario file, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Head-locked camera image, no decoupling.
    FixedRgb,
    /// Decoupled viewpoint, live point cloud only.
    Decoupled,
    /// Decoupled viewpoint, live point cloud over the scanned mesh.
    DecoupledWithMesh,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FixedRgb, Mode::Decoupled, Mode::DecoupledWithMesh];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FixedRgb => "fixed_rgb",
            Mode::Decoupled => "decoupled",
            Mode::DecoupledWithMesh => "decoupled_with_mesh",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub duration_s: f64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_filter_rate")]
    pub filter_rate: f64,
    /// Head-to-camera misalignment (degrees) beyond which the fixed image
    /// no longer counts as covering the view.
    #[serde(default = "default_fixed_rgb_tolerance")]
    pub fixed_rgb_tolerance_deg: f64,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub robot: RobotConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    pub camera: CameraModel,
    pub hmd: CameraModel,
    #[serde(default)]
    pub mesh: MeshConfig,
    pub scene: SceneConfig,
    #[serde(default)]
    pub script: Vec<ScriptEvent>,
}

fn default_tick_rate() -> f64 {
    60.0
}

fn default_filter_rate() -> f64 {
    0.2
}

fn default_fixed_rgb_tolerance() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub command_delay_s: f64,
    pub feedback_delay_s: f64,
    #[serde(default)]
    pub jitter_stddev_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instability: Option<InstabilityConfig>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            command_delay_s: 0.2,
            feedback_delay_s: 0.2,
            jitter_stddev_s: 0.0,
            instability: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstabilityConfig {
    pub start_s: f64,
    pub duration_s: f64,
    /// Added to each direction's delay while the episode lasts.
    pub extra_delay_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub yaw_limit_deg: f64,
    pub pitch_limit_deg: f64,
    pub max_velocity_deg_s: f64,
    pub servo_time_constant_s: f64,
    /// Head origin in the robot body at zero joint angles.
    pub neck_offset: [f64; 3],
    /// Camera origin in the head frame; the camera looks along head +x.
    pub camera_offset: [f64; 3],
    #[serde(default)]
    pub start: PlanarPose,
    #[serde(default)]
    pub odometry_noise_m: f64,
    #[serde(default)]
    pub odometry_noise_deg: f64,
    #[serde(default)]
    pub depth_noise_m: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            yaw_limit_deg: 55.0,
            pitch_limit_deg: 40.0,
            max_velocity_deg_s: 120.0,
            servo_time_constant_s: 0.1,
            neck_offset: [0.0, 0.0, 1.45],
            camera_offset: [0.08, 0.0, 0.05],
            start: PlanarPose::default(),
            odometry_noise_m: 0.0,
            odometry_noise_deg: 0.0,
            depth_noise_m: 0.0,
        }
    }
}

/// Position plus heading about z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarPose {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

impl PlanarPose {
    pub fn pose(&self) -> Pose {
        Pose::from_yaw_pitch(self.yaw_deg.to_radians(), 0.0, Vec3::from(self.position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    /// Base station in the tracking frame.
    pub base_in_tracking: PlanarPose,
    /// HMD position in the tracking frame before any shift.
    pub head_position: [f64; 3],
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            base_in_tracking: PlanarPose {
                position: [1.5, 1.0, 2.2],
                yaw_deg: -145.0,
            },
            head_position: [0.0, 0.0, 1.65],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub lag_window_s: f64,
    pub lag_max_s: f64,
    /// Ticks between windowed lag updates.
    pub lag_every_ticks: u64,
    /// Trailing span used for the steady-state summary values.
    pub steady_state_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            lag_window_s: 4.0,
            lag_max_s: 2.5,
            lag_every_ticks: 6,
            steady_state_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub cell_size_m: f64,
    pub tint_strength: f64,
    /// Rate at which full point clouds are sent and integrated while
    /// scanning; capped at the tick rate.
    #[serde(default = "default_scan_rate")]
    pub scan_rate_hz: f64,
}

fn default_scan_rate() -> f64 {
    10.0
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            cell_size_m: 0.05,
            tint_strength: 0.35,
            scan_rate_hz: default_scan_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    #[serde(default)]
    pub boxes: Vec<SceneBox>,
    #[serde(default)]
    pub planes: Vec<ScenePlane>,
}

impl SceneConfig {
    pub fn build(&self) -> SceneModel {
        SceneModel::new(self.boxes.clone(), self.planes.clone(), self.bounds_min, self.bounds_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEvent {
    pub at_s: f64,
    pub action: Action,
}

/// Operator-side inputs, timed by the script or sent live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// Smooth head move to an absolute yaw/pitch in the tracking frame.
    HeadTarget {
        yaw_deg: f64,
        pitch_deg: f64,
        #[serde(default)]
        duration_s: f64,
    },
    /// Sinusoidal yaw about the current yaw, pitch held.
    YawSweep {
        amplitude_deg: f64,
        period_s: f64,
        duration_s: f64,
    },
    BaseVelocity {
        forward: f64,
        lateral: f64,
        yaw_rate_deg_s: f64,
    },
    Calibrate,
    Scan {
        active: bool,
    },
    /// Operator steps by this offset within the tracking space.
    OperatorShift {
        x: f64,
        y: f64,
        z: f64,
    },
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "<document>".into() } else { path }, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    pub fn tick_period(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration_s * self.tick_rate_hz).round() as u64
    }

    /// Ticks between full point clouds while scanning.
    pub fn scan_interval_ticks(&self) -> u64 {
        ((self.tick_rate_hz / self.mesh.scan_rate_hz).round() as u64).max(1)
    }

    pub fn neck_model(&self) -> NeckModel {
        NeckModel {
            neck_offset: Vec3::from(self.robot.neck_offset),
            yaw_limit: self.robot.yaw_limit_deg.to_radians(),
            pitch_limit: self.robot.pitch_limit_deg.to_radians(),
        }
    }

    fn instability(&self) -> Option<Instability> {
        self.network.instability.map(|i| Instability {
            start: i.start_s,
            duration: i.duration_s,
            extra_delay: i.extra_delay_s,
        })
    }

    /// Operator-to-robot link. Each direction draws from its own stream.
    pub fn command_channel(&self) -> ChannelConfig {
        ChannelConfig {
            base_delay: self.network.command_delay_s,
            jitter_stddev: self.network.jitter_stddev_s,
            instability: self.instability(),
            seed: self.seed.wrapping_mul(2).wrapping_add(0x5eed_0001),
            tick_rate: self.tick_rate_hz,
        }
    }

    pub fn feedback_channel(&self) -> ChannelConfig {
        ChannelConfig {
            base_delay: self.network.feedback_delay_s,
            seed: self.seed.wrapping_mul(2).wrapping_add(0x5eed_0002),
            ..self.command_channel()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Validator::default();
        v.check("duration_s", self.duration_s > 0.0 && self.duration_s.is_finite(), "must be positive");
        v.check("tick_rate_hz", self.tick_rate_hz > 0.0 && self.tick_rate_hz <= 10_000.0, "must be in (0, 10000]");
        v.check("filter_rate", self.filter_rate > 0.0 && self.filter_rate <= 1.0, "must be in (0, 1]");
        v.non_negative("fixed_rgb_tolerance_deg", self.fixed_rgb_tolerance_deg);

        let n = &self.network;
        v.non_negative("network.command_delay_s", n.command_delay_s);
        v.non_negative("network.feedback_delay_s", n.feedback_delay_s);
        v.non_negative("network.jitter_stddev_s", n.jitter_stddev_s);
        if let Some(i) = &n.instability {
            v.non_negative("network.instability.start_s", i.start_s);
            v.non_negative("network.instability.duration_s", i.duration_s);
            v.non_negative("network.instability.extra_delay_s", i.extra_delay_s);
        }

        let r = &self.robot;
        v.check("robot.yaw_limit_deg", r.yaw_limit_deg > 0.0 && r.yaw_limit_deg <= 180.0, "must be in (0, 180]");
        v.check("robot.pitch_limit_deg", r.pitch_limit_deg > 0.0 && r.pitch_limit_deg < 90.0, "must be in (0, 90)");
        v.check("robot.max_velocity_deg_s", r.max_velocity_deg_s > 0.0, "must be positive");
        v.non_negative("robot.servo_time_constant_s", r.servo_time_constant_s);
        v.non_negative("robot.odometry_noise_m", r.odometry_noise_m);
        v.non_negative("robot.odometry_noise_deg", r.odometry_noise_deg);
        v.non_negative("robot.depth_noise_m", r.depth_noise_m);
        v.finite3("robot.neck_offset", &r.neck_offset);
        v.finite3("robot.camera_offset", &r.camera_offset);
        v.finite3("robot.start.position", &r.start.position);

        v.finite3("operator.base_in_tracking.position", &self.operator.base_in_tracking.position);
        v.finite3("operator.head_position", &self.operator.head_position);

        let m = &self.metrics;
        v.check("metrics.lag_window_s", m.lag_window_s > 0.0, "must be positive");
        v.non_negative("metrics.lag_max_s", m.lag_max_s);
        v.check("metrics.lag_every_ticks", m.lag_every_ticks > 0, "must be positive");
        v.check("metrics.steady_state_s", m.steady_state_s > 0.0, "must be positive");

        for (key, cam) in [("camera", &self.camera), ("hmd", &self.hmd)] {
            v.check(&format!("{key}.horizontal_fov_deg"), in_fov(cam.horizontal_fov_deg), "must be in (0, 180)");
            v.check(&format!("{key}.vertical_fov_deg"), in_fov(cam.vertical_fov_deg), "must be in (0, 180)");
            v.check(&format!("{key}.max_range"), cam.max_range > 0.0, "must be positive");
            v.check(&format!("{key}.cols"), cam.cols > 0 && cam.cols <= 4096, "must be in [1, 4096]");
            v.check(&format!("{key}.rows"), cam.rows > 0 && cam.rows <= 4096, "must be in [1, 4096]");
        }

        v.check("mesh.cell_size_m", self.mesh.cell_size_m > 0.0, "must be positive");
        v.check("mesh.scan_rate_hz", self.mesh.scan_rate_hz > 0.0, "must be positive");
        v.check(
            "mesh.tint_strength",
            self.mesh.tint_strength > 0.0 && self.mesh.tint_strength <= 1.0,
            "must be in (0, 1]",
        );

        let s = &self.scene;
        v.check(
            "scene.bounds_max",
            (0..3).all(|i| s.bounds_min[i] < s.bounds_max[i]),
            "must exceed bounds_min on every axis",
        );
        for (i, b) in s.boxes.iter().enumerate() {
            v.check(
                &format!("scene.boxes[{i}].max"),
                (0..3).all(|k| b.min[k] < b.max[k]),
                "must exceed min on every axis",
            );
        }
        for (i, p) in s.planes.iter().enumerate() {
            let nrm = Vec3::from(p.normal).norm();
            v.check(&format!("scene.planes[{i}].normal"), nrm > 1e-9 && nrm.is_finite(), "must be non-zero");
            v.finite3(&format!("scene.planes[{i}].point"), &p.point);
        }

        for (i, e) in self.script.iter().enumerate() {
            let at = format!("script[{i}]");
            v.check(
                &format!("{at}.at_s"),
                e.at_s >= 0.0 && e.at_s <= self.duration_s,
                "must lie within [0, duration_s]",
            );
            match e.action {
                Action::HeadTarget {
                    yaw_deg,
                    pitch_deg,
                    duration_s,
                } => {
                    v.check(&format!("{at}.action.yaw_deg"), yaw_deg.abs() <= 180.0, "must be in [-180, 180]");
                    v.check(&format!("{at}.action.pitch_deg"), pitch_deg.abs() < 90.0, "must be in (-90, 90)");
                    v.non_negative(&format!("{at}.action.duration_s"), duration_s);
                }
                Action::YawSweep {
                    amplitude_deg,
                    period_s,
                    duration_s,
                } => {
                    v.check(
                        &format!("{at}.action.amplitude_deg"),
                        (0.0..=180.0).contains(&amplitude_deg),
                        "must be in [0, 180]",
                    );
                    v.check(&format!("{at}.action.period_s"), period_s > 0.0, "must be positive");
                    v.non_negative(&format!("{at}.action.duration_s"), duration_s);
                }
                Action::BaseVelocity {
                    forward,
                    lateral,
                    yaw_rate_deg_s,
                } => {
                    v.check(&format!("{at}.action.forward"), forward.is_finite(), "must be finite");
                    v.check(&format!("{at}.action.lateral"), lateral.is_finite(), "must be finite");
                    v.check(&format!("{at}.action.yaw_rate_deg_s"), yaw_rate_deg_s.is_finite(), "must be finite");
                }
                Action::OperatorShift { x, y, z } => {
                    v.finite3(&format!("{at}.action"), &[x, y, z]);
                }
                Action::Calibrate | Action::Scan { .. } => {}
            }
        }
        v.finish()
    }
}

fn in_fov(f: f64) -> bool {
    f > 0.0 && f < 180.0
}

#[derive(Default)]
struct Validator {
    first: Option<ConfigError>,
}

impl Validator {
    fn check(&mut self, path: &str, ok: bool, message: &str) {
        if !ok && self.first.is_none() {
            self.first = Some(ConfigError::new(path, message));
        }
    }

    fn non_negative(&mut self, path: &str, x: f64) {
        self.check(path, x >= 0.0 && x.is_finite(), "must be finite and non-negative");
    }

    fn finite3(&mut self, path: &str, x: &[f64; 3]) {
        self.check(path, x.iter().all(|c| c.is_finite()), "must be finite");
    }

    fn finish(self) -> Result<(), ConfigError> {
        self.first.map_or(Ok(()), Err)
    }
}
