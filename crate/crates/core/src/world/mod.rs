//! Synthetic scene, camera and HMD frusta, point-cloud capture, mesh
//! scanning and field-of-view coverage.

pub mod camera;
pub mod coverage;
pub mod distortion;
pub mod mesh;
pub mod scene;

pub use camera::{add_depth_noise, capture_pointcloud, CameraModel, CloudPoint, PointCloudFrame, RayGrid};
pub use coverage::{classify_coverage, CoverageLabel, CoverageMap, CoverageReport};
pub use distortion::{billboard_distortion, DistortionError};
pub use mesh::{scan_mesh, tint, MeshModel};
pub use scene::{Color, SceneBox, SceneModel, ScenePlane};
