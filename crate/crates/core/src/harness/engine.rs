//! Fixed-step simulation of the operator station, the two network links and
//! the robot.
//!
//! Each tick runs the operator side first (script, head tracking, arrived
//! feedback, calibration, view and coverage, head command) and then the
//! robot side (arrived commands, neck servo, base motion, capture,
//! feedback). A message sent with zero delay is therefore seen by the robot
//! in the same tick but by the operator only in the next one.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{Action, Mode, ScenarioConfig, ScriptEvent};
use super::metrics::MetricsRow;
use crate::calibration::{apply_calibration, calibrate, viewpoint_residual, CalibrationResult};
use crate::geometry::{rotation_angle, Pose, Vec3};
use crate::lag::lag_in_window;
use crate::netsim::DelayedChannel;
use crate::smoothing::{filter_step, FilterState};
use crate::statechain::{self, AnchorMode, MeasurementSet, NeckServo, VirtualAnchors, ViewState};
use crate::world::camera::{capture_with_grid, RayGrid};
use crate::world::coverage::classify_with_grid;
use crate::world::{add_depth_noise, capture_pointcloud, CameraModel, Color, CoverageLabel, CoverageMap, CoverageReport, MeshModel, PointCloudFrame, SceneModel};

const SCRIPT_EPS: f64 = 1e-9;

/// Live input from outside the engine, applied at the next tick boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    HeadTarget { yaw_deg: f64, pitch_deg: f64 },
    BaseVelocity { forward: f64, lateral: f64, yaw_rate_deg_s: f64 },
    Calibrate,
    SetMode { mode: Mode },
    Scan { active: bool },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("command field {0} must be finite")]
    NotFinite(&'static str),
}

impl Command {
    /// Rejects non-finite values and clamps angles into range.
    pub fn sanitized(self) -> Result<Self, CommandError> {
        let finite = |x: f64, name| if x.is_finite() { Ok(x) } else { Err(CommandError::NotFinite(name)) };
        Ok(match self {
            Command::HeadTarget { yaw_deg, pitch_deg } => Command::HeadTarget {
                yaw_deg: finite(yaw_deg, "yaw_deg")?.clamp(-180.0, 180.0),
                pitch_deg: finite(pitch_deg, "pitch_deg")?.clamp(-89.0, 89.0),
            },
            Command::BaseVelocity {
                forward,
                lateral,
                yaw_rate_deg_s,
            } => Command::BaseVelocity {
                forward: finite(forward, "forward")?,
                lateral: finite(lateral, "lateral")?,
                yaw_rate_deg_s: finite(yaw_rate_deg_s, "yaw_rate_deg_s")?,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct BaseVelocity {
    forward: f64,
    lateral: f64,
    /// rad/s
    yaw_rate: f64,
}

/// Operator-to-robot message.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RobotCommand {
    head_yaw: f64,
    head_pitch: f64,
    base: BaseVelocity,
}

/// Robot-to-operator message.
#[derive(Debug, Clone, PartialEq)]
struct Feedback {
    capture_time: f64,
    zed_in_robot: Pose,
    /// Odometry estimate of `M_Z^W`.
    zed_in_world: Pose,
    /// Ground-truth camera pose at capture.
    capture_pose: Pose,
    head_yaw: f64,
    head_pitch: f64,
    frame: Option<PointCloudFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HeadMotion {
    Hold,
    Ramp {
        from: (f64, f64),
        to: (f64, f64),
        start: f64,
        duration: f64,
    },
    Sweep {
        center: f64,
        amplitude: f64,
        period: f64,
        start: f64,
        duration: f64,
    },
}

/// Operator head orientation in the tracking frame, driven by the script.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OperatorHead {
    yaw: f64,
    pitch: f64,
    motion: HeadMotion,
}

impl OperatorHead {
    fn update(&mut self, t: f64) {
        match self.motion {
            HeadMotion::Hold => {}
            HeadMotion::Ramp {
                from,
                to,
                start,
                duration,
            } => {
                let u = if duration > 0.0 { ((t - start) / duration).clamp(0.0, 1.0) } else { 1.0 };
                let s = u * u * (3.0 - 2.0 * u);
                self.yaw = from.0 + (to.0 - from.0) * s;
                self.pitch = from.1 + (to.1 - from.1) * s;
                if u >= 1.0 {
                    self.motion = HeadMotion::Hold;
                }
            }
            HeadMotion::Sweep {
                center,
                amplitude,
                period,
                start,
                duration,
            } => {
                let tau = (t - start).min(duration);
                self.yaw = center + amplitude * (std::f64::consts::TAU * tau / period).sin();
                if t - start >= duration {
                    self.motion = HeadMotion::Hold;
                }
            }
        }
    }
}

/// Engine-facing view of one tick, for viewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub time_s: f64,
    pub mode: Mode,
    pub operator_pose: OperatorReadout,
    pub robot_pose: RobotReadout,
    pub coverage: CoverageImage,
    pub report: CoverageReport,
    pub lag_s: Option<f64>,
    pub calibration_residual: f64,
    pub gap_deg: f64,
    pub scanning: bool,
    pub mesh_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorReadout {
    /// HMD in the tracking frame.
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

/// Robot state as the operator last heard it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotReadout {
    pub body_position: [f64; 3],
    pub body_yaw_deg: f64,
    pub head_yaw_deg: f64,
    pub head_pitch_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageImage {
    pub cols: usize,
    pub rows: usize,
    /// Row-major from the top-left of the HMD view.
    pub labels: Vec<CoverageLabel>,
    pub colors: Vec<Color>,
}

pub struct Engine {
    config: ScenarioConfig,
    mode: Mode,
    dt: f64,
    tick: u64,
    scene: SceneModel,
    hmd_grid: RayGrid,
    camera_grid: RayGrid,
    mesh: MeshModel,
    script: Vec<ScriptEvent>,
    script_pos: usize,
    pending: VecDeque<Command>,

    head: OperatorHead,
    operator_offset: Vec3,
    base_in_tracking: Pose,
    base_command: BaseVelocity,
    scanning: bool,
    calibrate_pending: bool,

    servo: NeckServo,
    body_in_world: Pose,
    zed_in_head: Pose,
    robot_command: RobotCommand,
    sensor_rng: ChaCha8Rng,

    command_link: DelayedChannel<RobotCommand>,
    feedback_link: DelayedChannel<Feedback>,
    latest: Feedback,

    anchors: VirtualAnchors,
    filter: FilterState,
    measurement: MeasurementSet,
    last_calibration: Option<CalibrationResult>,
    coverage: Option<CoverageMap>,
    last_row: Option<MetricsRow>,

    operator_trace: VecDeque<f64>,
    robot_trace: VecDeque<f64>,
    lag: Option<f64>,
}

impl Engine {
    /// Builds the engine at tick 0. The config is validated first.
    pub fn new(config: ScenarioConfig) -> Result<Self, super::config::ConfigError> {
        config.validate()?;
        let dt = config.tick_period();
        let scene = config.scene.build();
        let mesh = MeshModel::new(&scene, config.mesh.cell_size_m, config.mesh.tint_strength);
        let mut script = config.script.clone();
        // stable sort keeps file order among events at the same time
        script.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));

        let servo = NeckServo::new(
            config.neck_model(),
            config.robot.max_velocity_deg_s.to_radians(),
            config.robot.servo_time_constant_s,
        );
        let body_in_world = config.robot.start.pose();
        let zed_in_head = Pose::from_translation(
            config.robot.camera_offset[0],
            config.robot.camera_offset[1],
            config.robot.camera_offset[2],
        );
        let zed_in_robot = statechain::zed_in_robot(&servo.head_in_body(), &zed_in_head);
        let capture_pose = body_in_world.compose(&zed_in_robot);
        let latest = Feedback {
            capture_time: 0.0,
            zed_in_robot,
            zed_in_world: capture_pose,
            capture_pose,
            head_yaw: 0.0,
            head_pitch: 0.0,
            frame: None,
        };

        let mode = config.mode;
        let anchors = VirtualAnchors {
            robot_in_world_virtual: statechain::robot_body_from_odometry(&capture_pose, &zed_in_robot),
            mode: anchor_mode(mode),
            ..VirtualAnchors::default()
        };
        let filter = FilterState::new(anchors.tracking_in_world_virtual(), config.filter_rate, dt)
            .expect("validated filter rate");

        let mut engine = Self {
            mode,
            dt,
            tick: 0,
            hmd_grid: config.hmd.ray_grid(),
            camera_grid: config.camera.ray_grid(),
            scene,
            mesh,
            script,
            script_pos: 0,
            pending: VecDeque::new(),
            head: OperatorHead {
                yaw: 0.0,
                pitch: 0.0,
                motion: HeadMotion::Hold,
            },
            operator_offset: Vec3::zeros(),
            base_in_tracking: config.operator.base_in_tracking.pose(),
            base_command: BaseVelocity::default(),
            scanning: false,
            calibrate_pending: false,
            servo,
            body_in_world,
            zed_in_head,
            robot_command: RobotCommand {
                head_yaw: 0.0,
                head_pitch: 0.0,
                base: BaseVelocity::default(),
            },
            sensor_rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed_0003)),
            command_link: DelayedChannel::new(config.command_channel()),
            feedback_link: DelayedChannel::new(config.feedback_channel()),
            latest,
            anchors,
            filter,
            measurement: MeasurementSet::default(),
            last_calibration: None,
            coverage: None,
            last_row: None,
            operator_trace: VecDeque::new(),
            robot_trace: VecDeque::new(),
            lag: None,
            config,
        };
        // start out calibrated on the initial state
        let hmd = engine.measure_hmd();
        let cal = calibrate(&engine.latest.zed_in_robot, &hmd, 0);
        engine.anchors = apply_calibration(&engine.anchors, &cal);
        engine.filter.reset(engine.anchors.tracking_in_world_virtual());
        Ok(engine)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Index of the next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.config.total_ticks()
    }

    pub fn scene(&self) -> &SceneModel {
        &self.scene
    }

    pub fn mesh(&self) -> &MeshModel {
        &self.mesh
    }

    pub fn scanning(&self) -> bool {
        self.scanning
    }

    pub fn anchors(&self) -> &VirtualAnchors {
        &self.anchors
    }

    pub fn measurement(&self) -> &MeasurementSet {
        &self.measurement
    }

    pub fn last_calibration(&self) -> Option<&CalibrationResult> {
        self.last_calibration.as_ref()
    }

    pub fn coverage(&self) -> Option<&CoverageMap> {
        self.coverage.as_ref()
    }

    pub fn last_row(&self) -> Option<&MetricsRow> {
        self.last_row.as_ref()
    }

    /// Current decoupled view computed through the frame graph.
    pub fn view(&self) -> ViewState {
        statechain::decoupled_view(&self.measurement, &self.anchors)
    }

    /// Queues a live command for the next tick. Returns the tick at which it
    /// takes effect.
    pub fn push_command(&mut self, command: Command) -> Result<u64, CommandError> {
        self.pending.push_back(command.sanitized()?);
        Ok(self.tick)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.anchors.mode = anchor_mode(mode);
    }

    /// A full point cloud from the camera pose of the latest feedback.
    pub fn capture_latest_frame(&self) -> PointCloudFrame {
        capture_pointcloud(&self.scene, &self.config.camera, &self.latest.capture_pose, self.latest.capture_time)
    }

    fn measure_hmd(&self) -> Pose {
        let position = Vec3::from(self.config.operator.head_position) + self.operator_offset;
        let hmd_true = Pose::from_yaw_pitch(self.head.yaw, self.head.pitch, position);
        // the base station sees the HMD in its own frame
        let hmd_in_base = self.base_in_tracking.inverse().compose(&hmd_true);
        statechain::hmd_in_tracking(&self.base_in_tracking, &hmd_in_base)
    }

    fn apply_action(&mut self, action: Action, t: f64) {
        match action {
            Action::HeadTarget {
                yaw_deg,
                pitch_deg,
                duration_s,
            } => {
                self.head.motion = HeadMotion::Ramp {
                    from: (self.head.yaw, self.head.pitch),
                    to: (yaw_deg.to_radians(), pitch_deg.to_radians()),
                    start: t,
                    duration: duration_s,
                };
            }
            Action::YawSweep {
                amplitude_deg,
                period_s,
                duration_s,
            } => {
                self.head.motion = HeadMotion::Sweep {
                    center: self.head.yaw,
                    amplitude: amplitude_deg.to_radians(),
                    period: period_s,
                    start: t,
                    duration: duration_s,
                };
            }
            Action::BaseVelocity {
                forward,
                lateral,
                yaw_rate_deg_s,
            } => {
                self.base_command = BaseVelocity {
                    forward,
                    lateral,
                    yaw_rate: yaw_rate_deg_s.to_radians(),
                };
            }
            Action::Calibrate => self.calibrate_pending = true,
            Action::Scan { active } => self.scanning = active,
            Action::OperatorShift { x, y, z } => self.operator_offset += Vec3::new(x, y, z),
        }
    }

    fn apply_command(&mut self, command: Command, t: f64) {
        let action = match command {
            Command::HeadTarget { yaw_deg, pitch_deg } => Action::HeadTarget {
                yaw_deg,
                pitch_deg,
                duration_s: 0.0,
            },
            Command::BaseVelocity {
                forward,
                lateral,
                yaw_rate_deg_s,
            } => Action::BaseVelocity {
                forward,
                lateral,
                yaw_rate_deg_s,
            },
            Command::Calibrate => Action::Calibrate,
            Command::Scan { active } => Action::Scan { active },
            Command::SetMode { mode } => {
                self.set_mode(mode);
                return;
            }
        };
        self.apply_action(action, t);
    }

    /// Advances one tick and returns its metrics row.
    pub fn step(&mut self) -> MetricsRow {
        let t = self.time();

        // inputs
        while let Some(e) = self.script.get(self.script_pos).copied() {
            if e.at_s > t + SCRIPT_EPS {
                break;
            }
            self.apply_action(e.action, t);
            self.script_pos += 1;
        }
        while let Some(c) = self.pending.pop_front() {
            self.apply_command(c, t);
        }

        // operator side
        self.head.update(t);
        let hmd_in_tracking = self.measure_hmd();
        for fb in self.feedback_link.poll(t) {
            if let Some(frame) = &fb.frame {
                self.mesh.scan(frame);
            }
            self.latest = Feedback { frame: None, ..fb };
        }
        let meas = MeasurementSet {
            hmd_in_tracking,
            zed_in_robot: self.latest.zed_in_robot,
            zed_in_world: self.latest.zed_in_world,
            timestamp: t,
        };
        let mut reset_filter = false;
        if std::mem::take(&mut self.calibrate_pending) {
            let cal = calibrate(&meas.zed_in_robot, &meas.hmd_in_tracking, self.tick);
            log::info!("calibrated at tick {} (residual {:.3e})", self.tick, cal.residual);
            self.anchors = apply_calibration(&self.anchors, &cal);
            self.last_calibration = Some(cal);
            reset_filter = true;
        }
        self.anchors.follow_odometry(&meas);
        let tracking_in_world = self.anchors.tracking_in_world_virtual();
        if reset_filter {
            self.filter.reset(tracking_in_world);
        } else {
            self.filter = filter_step(&self.filter, &tracking_in_world);
        }
        self.measurement = meas;

        let hmd_in_world = self.filter.smoothed.compose(&meas.hmd_in_tracking);
        let zed_in_world = statechain::zed_in_world_virtual(&meas, &self.anchors);
        let zed_in_hmd = hmd_in_world.inverse().compose(&zed_in_world);
        let residual = viewpoint_residual(&hmd_in_world, &zed_in_world).total();
        let coverage = self.classify(&zed_in_hmd);

        // head command: the HMD orientation as seen from the virtual robot body
        let target = self.anchors.tracking_in_robot_virtual.compose(&meas.hmd_in_tracking);
        let (target_yaw, target_pitch) = target.yaw_pitch();
        self.command_link.send(
            RobotCommand {
                head_yaw: target_yaw,
                head_pitch: target_pitch,
                base: self.base_command,
            },
            t,
        );

        // robot side
        if let Some(c) = self.command_link.poll(t).into_iter().last() {
            self.robot_command = c;
        }
        if self.tick > 0 {
            let b = self.robot_command.base;
            let motion = Pose::from_yaw_pitch(
                b.yaw_rate * self.dt,
                0.0,
                Vec3::new(b.forward * self.dt, b.lateral * self.dt, 0.0),
            );
            self.body_in_world = self.body_in_world.compose(&motion);
        }
        self.servo.step(self.robot_command.head_yaw, self.robot_command.head_pitch, self.dt);
        let zed_in_robot = statechain::zed_in_robot(&self.servo.head_in_body(), &self.zed_in_head);
        let capture_pose = self.body_in_world.compose(&zed_in_robot);
        let odometry = self.odometry(&capture_pose);
        let scan_tick = self.tick.is_multiple_of(self.config.scan_interval_ticks());
        let frame = (self.scanning && scan_tick).then(|| {
            let mut f = capture_with_grid(&self.scene, &self.config.camera, &self.camera_grid, &capture_pose, t);
            add_depth_noise(&mut f, self.config.robot.depth_noise_m, &mut self.sensor_rng);
            f
        });
        self.feedback_link.send(
            Feedback {
                capture_time: t,
                zed_in_robot,
                zed_in_world: odometry,
                capture_pose,
                head_yaw: self.servo.yaw,
                head_pitch: self.servo.pitch,
                frame,
            },
            t,
        );

        let row = self.record(t, target_yaw, target_pitch, &coverage.report, residual);
        self.coverage = Some(coverage);
        self.last_row = Some(row.clone());
        self.tick += 1;
        row
    }

    fn odometry(&mut self, truth: &Pose) -> Pose {
        let (sm, sr) = (self.config.robot.odometry_noise_m, self.config.robot.odometry_noise_deg.to_radians());
        if sm <= 0.0 && sr <= 0.0 {
            return *truth;
        }
        let mut draw = |s: f64| {
            if s > 0.0 {
                Normal::new(0.0, s).expect("finite noise").sample(&mut self.sensor_rng)
            } else {
                0.0
            }
        };
        let dt = Vec3::new(draw(sm), draw(sm), draw(sm));
        let dr = Vec3::new(draw(sr), draw(sr), draw(sr));
        truth.compose(&Pose::new(nalgebra::UnitQuaternion::from_scaled_axis(dr), dt))
    }

    /// Labels the HMD view. The HMD is placed in the real scene at the pose
    /// it has relative to the displayed point cloud.
    fn classify(&self, zed_in_hmd: &Pose) -> CoverageMap {
        let hmd_pose = self.latest.capture_pose.compose(&zed_in_hmd.inverse());
        let frame = PointCloudFrame::header(self.config.camera, self.latest.capture_pose, self.latest.capture_time);
        let mesh = (self.mode == Mode::DecoupledWithMesh).then_some(&self.mesh);
        let hmd: &CameraModel = &self.config.hmd;
        let mut map = classify_with_grid(&self.scene, mesh, hmd, &self.hmd_grid, &hmd_pose, Some(&frame));
        if self.mode == Mode::FixedRgb
            && rotation_angle(&zed_in_hmd.rotation) > self.config.fixed_rgb_tolerance_deg.to_radians()
        {
            // a head-locked image no longer lines up with the world
            map.drop_live();
        }
        map
    }

    fn record(&mut self, t: f64, target_yaw: f64, target_pitch: f64, report: &CoverageReport, residual: f64) -> MetricsRow {
        let m = self.config.metrics;
        let window = (m.lag_window_s / self.dt).round() as usize;
        let max_lag = (m.lag_max_s / self.dt).round() as usize;
        let (ry, rp) = (self.latest.head_yaw, self.latest.head_pitch);
        self.operator_trace.push_back(target_yaw);
        self.robot_trace.push_back(ry);
        while self.operator_trace.len() > window + max_lag {
            self.operator_trace.pop_front();
            self.robot_trace.pop_front();
        }
        if self.tick.is_multiple_of(m.lag_every_ticks) {
            let op = self.operator_trace.make_contiguous();
            let rb = self.robot_trace.make_contiguous();
            self.lag = lag_in_window(op, rb, self.dt, max_lag, window).ok();
        }
        let commanded = Pose::from_yaw_pitch(target_yaw, target_pitch, Vec3::zeros());
        let displayed = Pose::from_yaw_pitch(ry, rp, Vec3::zeros());
        MetricsRow {
            time_s: t,
            tick: self.tick,
            operator_yaw_deg: target_yaw.to_degrees(),
            operator_pitch_deg: target_pitch.to_degrees(),
            robot_yaw_deg: ry.to_degrees(),
            robot_pitch_deg: rp.to_degrees(),
            lag_s: self.lag,
            live_fraction: report.live_fraction,
            mesh_fraction: report.mesh_fraction,
            blank_fraction: report.blank_fraction,
            calibration_residual: residual,
            gap_deg: commanded.distance(&displayed).angle.to_degrees(),
            mesh_cells: self.mesh.len(),
            scanning: self.scanning,
        }
    }

    /// Immutable copy of the latest tick for viewers. `None` before the
    /// first step.
    pub fn snapshot(&self) -> Option<Snapshot> {
        let row = self.last_row.as_ref()?;
        let map = self.coverage.as_ref()?;
        let hmd = self.measurement.hmd_in_tracking;
        let (hy, hp) = hmd.yaw_pitch();
        let body = statechain::robot_body_from_odometry(&self.latest.zed_in_world, &self.latest.zed_in_robot);
        Some(Snapshot {
            tick: row.tick,
            time_s: row.time_s,
            mode: self.mode,
            operator_pose: OperatorReadout {
                position: hmd.translation.into(),
                yaw_deg: hy.to_degrees(),
                pitch_deg: hp.to_degrees(),
            },
            robot_pose: RobotReadout {
                body_position: body.translation.into(),
                body_yaw_deg: body.yaw_pitch().0.to_degrees(),
                head_yaw_deg: row.robot_yaw_deg,
                head_pitch_deg: row.robot_pitch_deg,
            },
            coverage: CoverageImage {
                cols: map.cols,
                rows: map.rows,
                labels: map.labels.clone(),
                colors: map.colors.clone(),
            },
            report: map.report,
            lag_s: row.lag_s,
            calibration_residual: row.calibration_residual,
            gap_deg: row.gap_deg,
            scanning: row.scanning,
            mesh_cells: row.mesh_cells,
        })
    }
}

fn anchor_mode(mode: Mode) -> AnchorMode {
    match mode {
        Mode::DecoupledWithMesh => AnchorMode::MeshAnchored,
        Mode::FixedRgb | Mode::Decoupled => AnchorMode::NoMesh,
    }
}
