//! Deterministic simulator for decoupled-viewpoint televisualization in
//! humanoid teleoperation.
//!
//! The operator's HMD and the robot's head camera are mapped into a shared
//! virtual space where they move independently; a live point cloud and a
//! tinted scanned mesh fill the operator's view. Everything runs on
//! simulated time with seeded randomness.

pub mod calibration;
pub mod geometry;
pub mod harness;
pub mod lag;
pub mod netsim;
pub mod smoothing;
pub mod statechain;
pub mod world;

pub use geometry::{FrameGraph, FrameId, Pose, Vec3};
