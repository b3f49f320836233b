//! Operator / virtual / robot space mapping.
//!
//! Measurements from the operator side (HMD in tracking space) and from the
//! robot side (camera in robot body, camera in world from odometry) are
//! mapped one-to-one into the virtual space, where the virtual HMD and the
//! virtual camera move independently of each other.

use serde::{Deserialize, Serialize};

use crate::geometry::{FrameError, FrameGraph, FrameId, Pose, Vec3};

use FrameId::*;

/// `[M_H^T, M_Z^R, M_Z^W]` sampled at `timestamp` (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub hmd_in_tracking: Pose,
    pub zed_in_robot: Pose,
    pub zed_in_world: Pose,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorMode {
    /// The virtual robot body sits at a fixed pose in the virtual world.
    NoMesh,
    /// The virtual robot body follows odometry so the point cloud lines up
    /// with the constructed mesh.
    MeshAnchored,
}

/// Virtual-space poses that are not direct copies of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualAnchors {
    /// `M_T'^R'`, replaced by each calibration.
    pub tracking_in_robot_virtual: Pose,
    /// `M_R'^W'`
    pub robot_in_world_virtual: Pose,
    /// `M_S^W'`
    pub mesh_in_world_virtual: Pose,
    pub mode: AnchorMode,
}

impl Default for VirtualAnchors {
    fn default() -> Self {
        Self {
            tracking_in_robot_virtual: Pose::identity(),
            robot_in_world_virtual: Pose::identity(),
            mesh_in_world_virtual: Pose::identity(),
            mode: AnchorMode::NoMesh,
        }
    }
}

impl VirtualAnchors {
    /// Refreshes the virtual robot body from odometry when mesh-anchored;
    /// leaves it untouched otherwise.
    pub fn follow_odometry(&mut self, meas: &MeasurementSet) {
        if self.mode == AnchorMode::MeshAnchored {
            self.robot_in_world_virtual = robot_body_from_odometry(&meas.zed_in_world, &meas.zed_in_robot);
        }
    }

    /// `M_T'^W'`
    pub fn tracking_in_world_virtual(&self) -> Pose {
        self.robot_in_world_virtual.compose(&self.tracking_in_robot_virtual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewState {
    /// `M_Z'^H'`
    pub zed_in_hmd_virtual: Pose,
    /// `M_H'^W'`
    pub hmd_in_world_virtual: Pose,
    /// `M_S^H'`
    pub mesh_in_hmd_virtual: Pose,
}

/// `M_H^T = M_B^T · M_H^B`
pub fn hmd_in_tracking(base_in_tracking: &Pose, hmd_in_base: &Pose) -> Pose {
    base_in_tracking.compose(hmd_in_base)
}

/// `M_Z^R = M_Rh^R · M_Z^Rh`
pub fn zed_in_robot(head_in_body: &Pose, zed_in_head: &Pose) -> Pose {
    head_in_body.compose(zed_in_head)
}

/// Robot body in world recovered from camera odometry:
/// `M_R'^W' := M_Z^W · (M_Z^R)^-1`.
pub fn robot_body_from_odometry(zed_in_world: &Pose, zed_in_robot: &Pose) -> Pose {
    zed_in_world.compose(&zed_in_robot.inverse())
}

pub const PATH_ZED_IN_HMD: [FrameId; 4] = [VirtualZed, VirtualRobotBody, VirtualTracking, VirtualHmd];
pub const PATH_HMD_IN_WORLD: [FrameId; 4] = [VirtualHmd, VirtualTracking, VirtualRobotBody, VirtualWorld];
pub const PATH_ZED_IN_WORLD: [FrameId; 3] = [VirtualZed, VirtualRobotBody, VirtualWorld];
pub const PATH_MESH_IN_HMD: [FrameId; 6] =
    [Mesh, VirtualWorld, VirtualZed, VirtualRobotBody, VirtualTracking, VirtualHmd];

/// Registers the virtual-space edges for one tick.
///
/// The measured triple is copied into the virtual space (`H'->T'`, `Z'->R'`,
/// `Z'->W'`); the anchors supply `T'->R'`, `R'->W'` and `S->W'`.
pub fn virtual_graph(meas: &MeasurementSet, anchors: &VirtualAnchors) -> FrameGraph {
    let mut g = FrameGraph::new();
    let edges = [
        (VirtualHmd, VirtualTracking, meas.hmd_in_tracking, true),
        (VirtualZed, VirtualRobotBody, meas.zed_in_robot, true),
        (VirtualZed, VirtualWorld, meas.zed_in_world, true),
        (VirtualTracking, VirtualRobotBody, anchors.tracking_in_robot_virtual, false),
        (VirtualRobotBody, VirtualWorld, anchors.robot_in_world_virtual, anchors.mode == AnchorMode::MeshAnchored),
        (Mesh, VirtualWorld, anchors.mesh_in_world_virtual, false),
    ];
    for (child, parent, pose, streamed) in edges {
        let r = if streamed {
            g.set_streamed(child, parent, pose)
        } else {
            g.set_static(child, parent, pose)
        };
        r.expect("virtual-space edges form a DAG");
    }
    g
}

/// Evaluates the decoupled view for the current measurements.
///
/// The HMD measurement is the live one while the camera measurements are
/// whatever arrived last, which is what makes the point cloud trail the
/// operator's head during fast turns.
pub fn decoupled_view(meas: &MeasurementSet, anchors: &VirtualAnchors) -> ViewState {
    let g = virtual_graph(meas, anchors);
    view_from_graph(&g).expect("virtual graph has every view path")
}

pub fn view_from_graph(g: &FrameGraph) -> Result<ViewState, FrameError> {
    Ok(ViewState {
        zed_in_hmd_virtual: g.query_along(&PATH_ZED_IN_HMD)?,
        hmd_in_world_virtual: g.query_along(&PATH_HMD_IN_WORLD)?,
        mesh_in_hmd_virtual: g.query_along(&PATH_MESH_IN_HMD)?,
    })
}

/// `M_Z'^W'` as placed by the anchors.
pub fn zed_in_world_virtual(meas: &MeasurementSet, anchors: &VirtualAnchors) -> Pose {
    anchors.robot_in_world_virtual.compose(&meas.zed_in_robot)
}

/// Two revolute neck joints (yaw about body z, then pitch about head y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckModel {
    /// Head frame origin in the body frame at zero joint angles (meters).
    pub neck_offset: Vec3,
    /// Symmetric joint limits in radians.
    pub yaw_limit: f64,
    pub pitch_limit: f64,
}

impl NeckModel {
    /// `M_Rh^R` for the given joint angles (radians), limits not applied.
    pub fn head_in_body(&self, yaw: f64, pitch: f64) -> Pose {
        Pose::from_yaw_pitch(yaw, pitch, self.neck_offset)
    }

    pub fn clamp(&self, yaw: f64, pitch: f64) -> (f64, f64) {
        (
            yaw.clamp(-self.yaw_limit, self.yaw_limit),
            pitch.clamp(-self.pitch_limit, self.pitch_limit),
        )
    }
}

/// Joint-space head servo: first-order tracking toward the clamped target,
/// capped at a maximum angular velocity per joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeckServo {
    pub model: NeckModel,
    /// rad/s
    pub max_velocity: f64,
    /// seconds; zero means the joint jumps to the target subject only to
    /// the velocity cap.
    pub time_constant: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl NeckServo {
    pub fn new(model: NeckModel, max_velocity: f64, time_constant: f64) -> Self {
        Self {
            model,
            max_velocity,
            time_constant,
            yaw: 0.0,
            pitch: 0.0,
        }
    }

    pub fn step(&mut self, target_yaw: f64, target_pitch: f64, dt: f64) {
        let (ty, tp) = self.model.clamp(target_yaw, target_pitch);
        self.yaw = self.joint_step(self.yaw, ty, dt);
        self.pitch = self.joint_step(self.pitch, tp, dt);
    }

    fn joint_step(&self, pos: f64, target: f64, dt: f64) -> f64 {
        let err = target - pos;
        let max_step = self.max_velocity * dt;
        let step = if self.time_constant > 0.0 {
            err * (1.0 - (-dt / self.time_constant).exp())
        } else {
            err
        };
        if step.abs() <= max_step {
            if self.time_constant > 0.0 {
                pos + step
            } else {
                target
            }
        } else {
            pos + max_step.copysign(step)
        }
    }

    pub fn head_in_body(&self) -> Pose {
        self.model.head_in_body(self.yaw, self.pitch)
    }
}
