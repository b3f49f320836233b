//! Viewing error of a flat image billboard versus a 3D point cloud.
//!
//! The camera image is shown as a plane perpendicular to the camera's
//! optical axis at `billboard_depth`. A scene point appears on that plane
//! where its viewing ray from the camera crosses it. Seen from an HMD that
//! is offset from the camera, the billboard image of the point and the true
//! point lie in different directions; a point cloud keeps the point at its
//! true position, so its error is zero.
//!
//! Along any ray of HMD offsets leaving the camera centre the error grows
//! monotonically up to an offset of `sqrt(|CB| |CP|)` (C camera, B billboard
//! image, P point), where the HMD touches the tangent circle through B and
//! P; beyond that it decays again.

use thiserror::Error;

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DistortionError {
    #[error("point lies behind the camera (depth {0})")]
    PointBehindCamera(f64),
    #[error("billboard depth must be positive, got {0}")]
    InvalidDepth(f64),
}

/// World position where `scene_point` is drawn on the billboard.
pub fn billboard_image(scene_point: &Vec3, camera_pose: &Pose, billboard_depth: f64) -> Result<Vec3, DistortionError> {
    if billboard_depth <= 0.0 || !billboard_depth.is_finite() {
        return Err(DistortionError::InvalidDepth(billboard_depth));
    }
    let c = camera_pose.translation;
    let ray = scene_point - c;
    let depth = ray.dot(&camera_pose.forward());
    if depth <= 0.0 {
        return Err(DistortionError::PointBehindCamera(depth));
    }
    Ok(c + ray * (billboard_depth / depth))
}

/// Angle (radians) between the HMD's view of the billboard image and of the
/// true point.
pub fn billboard_distortion(
    scene_point: &Vec3,
    camera_pose: &Pose,
    hmd_pose: &Pose,
    billboard_depth: f64,
) -> Result<f64, DistortionError> {
    let image = billboard_image(scene_point, camera_pose, billboard_depth)?;
    let h = hmd_pose.translation;
    let a = image - h;
    let b = scene_point - h;
    Ok(a.cross(&b).norm().atan2(a.dot(&b)))
}

/// Offset magnitude up to which the error is non-decreasing along any ray
/// of HMD positions leaving the camera centre.
pub fn monotone_offset_limit(scene_point: &Vec3, camera_pose: &Pose, billboard_depth: f64) -> Result<f64, DistortionError> {
    let image = billboard_image(scene_point, camera_pose, billboard_depth)?;
    let c = camera_pose.translation;
    Ok(((image - c).norm() * (scene_point - c).norm()).sqrt())
}
