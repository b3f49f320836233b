//! Live / mesh / blank labelling of the HMD field of view.

use serde::{Deserialize, Serialize};

use super::camera::{CameraModel, PointCloudFrame, RayGrid};
use super::mesh::MeshModel;
use super::scene::{Color, SceneModel};
use crate::geometry::{Pose, Vec3};

/// Colour drawn for cells that nothing covers.
pub const BLANK_GRAY: Color = [128, 128, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageLabel {
    Live,
    Mesh,
    Blank,
}

/// Solid-angle fractions of the HMD field of view.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub live_fraction: f64,
    pub mesh_fraction: f64,
    pub blank_fraction: f64,
}

impl CoverageReport {
    pub fn sum(&self) -> f64 {
        self.live_fraction + self.mesh_fraction + self.blank_fraction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub cols: usize,
    pub rows: usize,
    /// Row-major from the top-left of the HMD view.
    pub labels: Vec<CoverageLabel>,
    pub colors: Vec<Color>,
    pub report: CoverageReport,
}

impl CoverageMap {
    pub fn count(&self, label: CoverageLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Relabels every live cell as blank.
    pub fn drop_live(&mut self) {
        let mut moved = false;
        for (l, c) in self.labels.iter_mut().zip(&mut self.colors) {
            if *l == CoverageLabel::Live {
                *l = CoverageLabel::Blank;
                *c = BLANK_GRAY;
                moved = true;
            }
        }
        if moved {
            self.report.blank_fraction += self.report.live_fraction;
            self.report.live_fraction = 0.0;
        }
    }
}

/// Whether the surface point `p` (world frame) shows up in a frame captured
/// with `camera` at `capture_pose`: inside the frustum, in range and not
/// occluded.
pub fn seen_by(scene: &SceneModel, camera: &CameraModel, capture_pose: &Pose, p: &Vec3) -> bool {
    let local = capture_pose.inverse().apply(p);
    if !camera.contains_local(&local) {
        return false;
    }
    let offset = p - capture_pose.translation;
    let dist = offset.norm();
    let tol = 1e-6 * dist.max(1.0);
    match scene.raycast(&capture_pose.translation, &(offset / dist), dist + tol) {
        Some(h) => (h.distance - dist).abs() <= tol,
        None => false,
    }
}

/// Labels each HMD ray: live when it lands on a surface point the last frame
/// captured, else mesh when that point's cell is scanned, else blank.
/// Fractions are weighted by each ray cell's solid angle.
pub fn classify_coverage(
    scene: &SceneModel,
    mesh: Option<&MeshModel>,
    hmd: &CameraModel,
    hmd_pose: &Pose,
    last_frame: Option<&PointCloudFrame>,
) -> CoverageMap {
    classify_with_grid(scene, mesh, hmd, &hmd.ray_grid(), hmd_pose, last_frame)
}

pub fn classify_with_grid(
    scene: &SceneModel,
    mesh: Option<&MeshModel>,
    hmd: &CameraModel,
    grid: &RayGrid,
    hmd_pose: &Pose,
    last_frame: Option<&PointCloudFrame>,
) -> CoverageMap {
    let n = grid.len();
    let mut labels = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut weights = [0.0f64; 3];
    for (d, w) in grid.directions.iter().zip(&grid.solid_angles) {
        let dir = hmd_pose.rotate(d);
        let hit = scene.raycast(&hmd_pose.translation, &dir, hmd.max_range);
        let (label, color) = match hit {
            None => (CoverageLabel::Blank, BLANK_GRAY),
            Some(h) => {
                let live = last_frame.is_some_and(|f| seen_by(scene, &f.camera, &f.capture_pose, &h.point));
                if live {
                    (CoverageLabel::Live, h.color)
                } else if let Some(c) = mesh.and_then(|m| m.color(&m.key_of_hit(&h))) {
                    (CoverageLabel::Mesh, c)
                } else {
                    (CoverageLabel::Blank, BLANK_GRAY)
                }
            }
        };
        weights[label as usize] += w;
        labels.push(label);
        colors.push(color);
    }
    let total: f64 = weights.iter().sum();
    let report = CoverageReport {
        live_fraction: weights[0] / total,
        mesh_fraction: weights[1] / total,
        blank_fraction: weights[2] / total,
    };
    CoverageMap {
        cols: grid.cols,
        rows: grid.rows,
        labels,
        colors,
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::camera::capture_pointcloud;
    use crate::world::scene::ScenePlane;

    fn closed_room(half: f64) -> SceneModel {
        let mut planes = Vec::new();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut point = [0.0; 3];
                point[axis] = sign * half;
                let mut normal = [0.0; 3];
                normal[axis] = -sign;
                planes.push(ScenePlane {
                    point,
                    normal,
                    color: [(axis * 80) as u8, 100, if sign > 0.0 { 200 } else { 50 }],
                });
            }
        }
        SceneModel::new(Vec::new(), planes, [-half; 3], [half; 3])
    }

    fn model(h: f64, v: f64, n: usize) -> CameraModel {
        CameraModel {
            horizontal_fov_deg: h,
            vertical_fov_deg: v,
            max_range: 50.0,
            cols: n,
            rows: n,
        }
    }

    #[test]
    fn aligned_narrow_hmd_is_all_live() {
        let scene = closed_room(4.0);
        let cam = model(90.0, 60.0, 32);
        let hmd = model(80.0, 50.0, 32);
        let pose = Pose::from_yaw_pitch(0.3, 0.0, Vec3::new(0.2, -0.1, 0.0));
        let frame = capture_pointcloud(&scene, &cam, &pose, 0.0);
        let map = classify_coverage(&scene, None, &hmd, &pose, Some(&frame));
        assert_eq!(map.count(CoverageLabel::Live), 32 * 32);
        assert_eq!(map.report.live_fraction, 1.0);
    }

    #[test]
    fn turned_away_is_all_blank() {
        let scene = closed_room(4.0);
        let cam = model(90.0, 60.0, 16);
        let pose = Pose::identity();
        let frame = PointCloudFrame::header(cam, pose, 0.0);
        let hmd_pose = Pose::from_yaw_pitch(std::f64::consts::PI, 0.0, Vec3::zeros());
        let map = classify_coverage(&scene, None, &model(107.0, 98.0, 24), &hmd_pose, Some(&frame));
        assert_eq!(map.report.blank_fraction, 1.0);
        assert!((map.report.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occluded_points_are_not_live() {
        use crate::world::scene::SceneBox;
        let mut planes = closed_room(4.0).planes().to_vec();
        planes.truncate(6);
        let scene = SceneModel::new(
            vec![SceneBox {
                min: [1.0, -0.5, -0.5],
                max: [1.2, 0.5, 0.5],
                color: [255, 0, 0],
            }],
            planes,
            [-4.0; 3],
            [4.0; 3],
        );
        let cam = model(60.0, 60.0, 8);
        // wall point straight behind the box from the camera
        assert!(!seen_by(&scene, &cam, &Pose::identity(), &Vec3::new(4.0, 0.0, 0.0)));
        assert!(seen_by(&scene, &cam, &Pose::identity(), &Vec3::new(1.0, 0.0, 0.0)));
        assert!(seen_by(&scene, &cam, &Pose::identity(), &Vec3::new(4.0, 2.2, 0.0)));
    }

    #[test]
    fn drop_live_moves_weight_to_blank() {
        let scene = closed_room(4.0);
        let cam = model(90.0, 60.0, 16);
        let frame = PointCloudFrame::header(cam, Pose::identity(), 0.0);
        let mut map = classify_coverage(&scene, None, &model(100.0, 80.0, 16), &Pose::identity(), Some(&frame));
        assert!(map.report.live_fraction > 0.3);
        map.drop_live();
        assert_eq!(map.count(CoverageLabel::Live), 0);
        assert!((map.report.blank_fraction - 1.0).abs() < 1e-12);
    }
}
