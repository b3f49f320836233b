//! Pinhole frustum model shared by the robot camera and the HMD, plus
//! synthetic depth capture.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{Color, SceneModel};
use crate::geometry::{Pose, Vec3};

/// Rectangular frustum looking along local +x (left is +y, up is +z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub horizontal_fov_deg: f64,
    pub vertical_fov_deg: f64,
    pub max_range: f64,
    pub cols: usize,
    pub rows: usize,
}

impl CameraModel {
    pub fn is_valid(&self) -> bool {
        let fov_ok = |f: f64| f > 0.0 && f < 180.0;
        fov_ok(self.horizontal_fov_deg)
            && fov_ok(self.vertical_fov_deg)
            && self.max_range > 0.0
            && self.cols > 0
            && self.rows > 0
    }

    pub fn tan_half_h(&self) -> f64 {
        (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }

    pub fn tan_half_v(&self) -> f64 {
        (self.vertical_fov_deg.to_radians() / 2.0).tan()
    }

    /// Whether a point given in the camera frame lies inside the frustum.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        const SLACK: f64 = 1e-12;
        p.x > 0.0
            && p.y.abs() <= self.tan_half_h() * p.x * (1.0 + SLACK)
            && p.z.abs() <= self.tan_half_v() * p.x * (1.0 + SLACK)
            && p.norm() <= self.max_range
    }

    /// Whether the local direction lies inside the frustum's angular extent.
    pub fn contains_direction(&self, d: &Vec3) -> bool {
        d.x > 0.0 && d.y.abs() <= self.tan_half_h() * d.x && d.z.abs() <= self.tan_half_v() * d.x
    }

    pub fn ray_grid(&self) -> RayGrid {
        RayGrid::new(self)
    }
}

/// One ray per image cell through the cell centre on the `x = 1` plane,
/// with the exact solid angle the cell subtends.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGrid {
    pub cols: usize,
    pub rows: usize,
    /// Unit directions in the camera frame, row-major from the top-left.
    pub directions: Vec<Vec3>,
    /// Steradians per cell.
    pub solid_angles: Vec<f64>,
}

impl RayGrid {
    pub fn new(camera: &CameraModel) -> Self {
        let (th, tv) = (camera.tan_half_h(), camera.tan_half_v());
        let (cols, rows) = (camera.cols, camera.rows);
        let u_at = |c: f64| th * (1.0 - 2.0 * c / cols as f64);
        let v_at = |r: f64| tv * (1.0 - 2.0 * r / rows as f64);
        let mut directions = Vec::with_capacity(cols * rows);
        let mut solid_angles = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                let (u, v) = (u_at(c as f64 + 0.5), v_at(r as f64 + 0.5));
                directions.push(Vec3::new(1.0, u, v).normalize());
                solid_angles.push(
                    rect_solid_angle(u_at(c as f64 + 1.0), u_at(c as f64), v_at(r as f64 + 1.0), v_at(r as f64)),
                );
            }
        }
        Self {
            cols,
            rows,
            directions,
            solid_angles,
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Solid angle of `[u0, u1] x [v0, v1]` on the plane one unit in front of
/// the apex.
pub fn rect_solid_angle(u0: f64, u1: f64, v0: f64, v1: f64) -> f64 {
    let f = |u: f64, v: f64| (u * v / (1.0 + u * u + v * v).sqrt()).atan();
    (f(u1, v1) - f(u0, v1) - f(u1, v0) + f(u0, v0)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    /// Camera frame, meters.
    pub position: Vec3,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloudFrame {
    pub points: Vec<CloudPoint>,
    /// `M_Z^W` at capture.
    pub capture_pose: Pose,
    pub timestamp: f64,
    pub camera: CameraModel,
}

impl PointCloudFrame {
    /// A frame that records only where and how it was captured.
    pub fn header(camera: CameraModel, capture_pose: Pose, timestamp: f64) -> Self {
        Self {
            points: Vec::new(),
            capture_pose,
            timestamp,
            camera,
        }
    }

    pub fn world_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(|p| self.capture_pose.apply(&p.position))
    }

    /// ASCII PLY, one `x y z r g b` vertex per line in the camera frame.
    pub fn write_ply<W: Write>(&self, mut w: W) -> io::Result<()> {
        let q = self.capture_pose.rotation.quaternion();
        let t = self.capture_pose.translation;
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "comment timestamp {}", self.timestamp)?;
        writeln!(
            w,
            "comment capture_pose qw {} qx {} qy {} qz {} tx {} ty {} tz {}",
            q.w, q.i, q.j, q.k, t.x, t.y, t.z
        )?;
        writeln!(w, "element vertex {}", self.points.len())?;
        for axis in ["x", "y", "z"] {
            writeln!(w, "property double {axis}")?;
        }
        for ch in ["red", "green", "blue"] {
            writeln!(w, "property uchar {ch}")?;
        }
        writeln!(w, "end_header")?;
        for p in &self.points {
            let [r, g, b] = p.color;
            writeln!(w, "{} {} {} {r} {g} {b}", p.position.x, p.position.y, p.position.z)?;
        }
        Ok(())
    }
}

/// Casts one ray per grid cell; each nearest hit within range becomes a point.
pub fn capture_pointcloud(scene: &SceneModel, camera: &CameraModel, pose: &Pose, timestamp: f64) -> PointCloudFrame {
    let grid = camera.ray_grid();
    capture_with_grid(scene, camera, &grid, pose, timestamp)
}

pub fn capture_with_grid(
    scene: &SceneModel,
    camera: &CameraModel,
    grid: &RayGrid,
    pose: &Pose,
    timestamp: f64,
) -> PointCloudFrame {
    let origin = pose.translation;
    let points = grid
        .directions
        .iter()
        .filter_map(|d| {
            let hit = scene.raycast(&origin, &pose.rotate(d), camera.max_range)?;
            Some(CloudPoint {
                position: d * hit.distance,
                color: hit.color,
            })
        })
        .collect();
    PointCloudFrame {
        points,
        capture_pose: *pose,
        timestamp,
        camera: *camera,
    }
}

/// Perturbs each point's range along its viewing ray.
pub fn add_depth_noise<R: Rng>(frame: &mut PointCloudFrame, stddev: f64, rng: &mut R) {
    if stddev <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, stddev).expect("finite stddev");
    for p in &mut frame.points {
        let range = p.position.norm();
        let noisy = (range + normal.sample(rng)).max(1e-6);
        p.position *= noisy / range;
    }
}
