//! Online viewpoint calibration.
//!
//! The virtual tracking space is moved so that the calibrated virtual HMD
//! lands on the virtual camera, while the HMD-in-tracking relative pose
//! (owned by the base-station measurement) is left untouched.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, PoseDistance};
use crate::statechain::VirtualAnchors;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// `M_T''^R'`
    pub tracking_in_robot_virtual: Pose,
    pub applied_at: u64,
    /// Translation norm plus rotation angle between the calibrated virtual
    /// HMD and the virtual camera.
    pub residual: f64,
}

/// `M_T''^R' = M_Z^R · M_T^H`.
pub fn calibrate(zed_in_robot: &Pose, hmd_in_tracking: &Pose, tick: u64) -> CalibrationResult {
    let tracking_in_robot = zed_in_robot.compose(&hmd_in_tracking.inverse());
    // Both sides share M_R'^W', so the residual can be taken in R'.
    let hmd_in_robot = tracking_in_robot.compose(hmd_in_tracking);
    CalibrationResult {
        tracking_in_robot_virtual: tracking_in_robot,
        applied_at: tick,
        residual: hmd_in_robot.distance(zed_in_robot).total(),
    }
}

/// Installs the new tracking anchor; every other anchor is kept as is.
pub fn apply_calibration(anchors: &VirtualAnchors, result: &CalibrationResult) -> VirtualAnchors {
    VirtualAnchors {
        tracking_in_robot_virtual: result.tracking_in_robot_virtual,
        ..*anchors
    }
}

/// Gap between the virtual HMD `M_H'^W'` and the virtual camera `M_Z'^W'`.
pub fn viewpoint_residual(hmd_in_world_virtual: &Pose, zed_in_world_virtual: &Pose) -> PoseDistance {
    hmd_in_world_virtual.distance(zed_in_world_virtual)
}
