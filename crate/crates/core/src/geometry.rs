//! Rigid transforms and the named frame graph.
//!
//! Convention: right-handed, z-up, x-forward for every frame. A [`Pose`]
//! written `M_X^Y` is the pose of frame X expressed in frame Y, so that
//! `compose(M_X^Y, M_C^X) = M_C^Y`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use nalgebra::{Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Rotation plus translation (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose, normalizing the rotation.
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: renormalized(rotation),
            translation,
        }
    }

    /// From raw quaternion components `(w, x, y, z)`; the quaternion is normalized.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64, translation: Vec3) -> Self {
        Self {
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::new(x, y, z),
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Yaw about +z, then pitch about the rotated +y (positive pitch tilts
    /// the forward axis downward). Angles in radians.
    pub fn from_yaw_pitch(yaw: f64, pitch: f64, translation: Vec3) -> Self {
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch);
        Self::new(rotation, translation)
    }

    /// `self ∘ other`: applies `other` first. With `self = M_X^Y` and
    /// `other = M_C^X` the result is `M_C^Y`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: renormalized(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rotation = self.rotation.inverse();
        Pose {
            translation: -(rotation * self.translation),
            rotation,
        }
    }

    /// Rotates, then translates `point`.
    pub fn apply(&self, point: &Vec3) -> Vec3 {
        self.rotation * point + self.translation
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Unit forward (+x) axis of this frame expressed in the parent.
    pub fn forward(&self) -> Vec3 {
        self.rotation * Vec3::x()
    }

    /// Yaw and pitch (radians) of the forward axis, consistent with
    /// [`Pose::from_yaw_pitch`] when there is no roll.
    pub fn yaw_pitch(&self) -> (f64, f64) {
        let f = self.forward();
        let yaw = f.y.atan2(f.x);
        let pitch = (-f.z).atan2((f.x * f.x + f.y * f.y).sqrt());
        (yaw, pitch)
    }

    pub fn distance(&self, other: &Pose) -> PoseDistance {
        PoseDistance {
            translation: (self.translation - other.translation).norm(),
            angle: rotation_angle(&(self.rotation.inverse() * other.rotation)),
        }
    }

    pub fn to_isometry(&self) -> nalgebra::Isometry3<f64> {
        nalgebra::Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }
}

/// Rotation angle in `[0, pi]`, accurate down to tiny angles.
pub fn rotation_angle(q: &UnitQuaternion<f64>) -> f64 {
    let q = q.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

fn renormalized(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let mut q = q;
    q.renormalize();
    q
}

/// Translation and rotation-angle gap between two poses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDistance {
    /// meters
    pub translation: f64,
    /// radians
    pub angle: f64,
}

impl PoseDistance {
    pub fn total(&self) -> f64 {
        self.translation + self.angle
    }

    pub fn within(&self, tol: f64) -> bool {
        self.translation < tol && self.angle < tol
    }
}

/// Every frame that appears in the teleoperation mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrameId {
    /// H: operator head-mounted display.
    Hmd,
    /// Z: robot head camera.
    Zed,
    /// T: operator tracking space.
    Tracking,
    /// R: robot body.
    RobotBody,
    /// W: world.
    World,
    /// Rh: robot head (neck output link).
    RobotHead,
    /// B: tracking base station.
    BaseStation,
    /// H': virtual HMD.
    VirtualHmd,
    /// Z': virtual camera.
    VirtualZed,
    /// T': virtual tracking space.
    VirtualTracking,
    /// R': virtual robot body.
    VirtualRobotBody,
    /// W': world frame of the virtual space.
    VirtualWorld,
    /// S: constructed mesh.
    Mesh,
}

impl FrameId {
    pub const ALL: [FrameId; 13] = [
        FrameId::Hmd,
        FrameId::Zed,
        FrameId::Tracking,
        FrameId::RobotBody,
        FrameId::World,
        FrameId::RobotHead,
        FrameId::BaseStation,
        FrameId::VirtualHmd,
        FrameId::VirtualZed,
        FrameId::VirtualTracking,
        FrameId::VirtualRobotBody,
        FrameId::VirtualWorld,
        FrameId::Mesh,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            FrameId::Hmd => "H",
            FrameId::Zed => "Z",
            FrameId::Tracking => "T",
            FrameId::RobotBody => "R",
            FrameId::World => "W",
            FrameId::RobotHead => "Rh",
            FrameId::BaseStation => "B",
            FrameId::VirtualHmd => "H'",
            FrameId::VirtualZed => "Z'",
            FrameId::VirtualTracking => "T'",
            FrameId::VirtualRobotBody => "R'",
            FrameId::VirtualWorld => "W'",
            FrameId::Mesh => "S",
        }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Static,
    Streamed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub pose: Pose,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("no path from {from} to {to}")]
    NoPath { from: FrameId, to: FrameId },
    #[error("edge {child} -> {parent} would close a directed cycle")]
    Cycle { child: FrameId, parent: FrameId },
    #[error("frames {from} and {to} are not joined by a registered edge")]
    NotAdjacent { from: FrameId, to: FrameId },
}

/// Directed acyclic registry of `child -> parent` edges, each holding
/// `M_child^parent`. Queries may traverse edges backwards, in which case the
/// edge pose is inverted.
#[derive(Debug, Clone, Default)]
pub struct FrameGraph {
    edges: BTreeMap<(FrameId, FrameId), Edge>,
}

impl FrameGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers or replaces `M_child^parent`.
    pub fn set(
        &mut self,
        child: FrameId,
        parent: FrameId,
        pose: Pose,
        kind: EdgeKind,
    ) -> Result<(), FrameError> {
        if child == parent || self.reaches(parent, child) {
            return Err(FrameError::Cycle { child, parent });
        }
        self.edges.insert((child, parent), Edge { pose, kind });
        Ok(())
    }

    pub fn set_static(&mut self, child: FrameId, parent: FrameId, pose: Pose) -> Result<(), FrameError> {
        self.set(child, parent, pose, EdgeKind::Static)
    }

    pub fn set_streamed(&mut self, child: FrameId, parent: FrameId, pose: Pose) -> Result<(), FrameError> {
        self.set(child, parent, pose, EdgeKind::Streamed)
    }

    pub fn edge(&self, child: FrameId, parent: FrameId) -> Option<&Edge> {
        self.edges.get(&(child, parent))
    }

    pub fn edges(&self) -> impl Iterator<Item = (FrameId, FrameId, &Edge)> {
        self.edges.iter().map(|(&(c, p), e)| (c, p, e))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    // directed reachability along child -> parent edges
    fn reaches(&self, from: FrameId, to: FrameId) -> bool {
        let mut stack = vec![from];
        let mut seen = Vec::new();
        while let Some(f) = stack.pop() {
            if f == to {
                return true;
            }
            if seen.contains(&f) {
                continue;
            }
            seen.push(f);
            stack.extend(self.edges.keys().filter(|(c, _)| *c == f).map(|&(_, p)| p));
        }
        false
    }

    /// `M_from^to` for two frames joined by a single edge in either direction.
    pub fn hop(&self, from: FrameId, to: FrameId) -> Result<Pose, FrameError> {
        if let Some(e) = self.edges.get(&(from, to)) {
            Ok(e.pose)
        } else if let Some(e) = self.edges.get(&(to, from)) {
            Ok(e.pose.inverse())
        } else {
            Err(FrameError::NotAdjacent { from, to })
        }
    }

    /// Composes the hops of an explicit frame path, returning
    /// `M_{path[0]}^{path[last]}`.
    pub fn query_along(&self, path: &[FrameId]) -> Result<Pose, FrameError> {
        let mut acc = Pose::identity();
        for pair in path.windows(2) {
            let hop = self.hop(pair[0], pair[1])?;
            acc = hop.compose(&acc);
        }
        Ok(acc)
    }

    /// Shortest frame path from `child` to `parent` (fewest hops; ties broken
    /// by frame order).
    pub fn path(&self, child: FrameId, parent: FrameId) -> Result<Vec<FrameId>, FrameError> {
        let mut prev: BTreeMap<FrameId, FrameId> = BTreeMap::new();
        let mut queue = VecDeque::from([child]);
        let mut visited = vec![child];
        while let Some(f) = queue.pop_front() {
            if f == parent {
                let mut path = vec![f];
                let mut cur = f;
                while let Some(&p) = prev.get(&cur) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Ok(path);
            }
            let mut next: Vec<FrameId> = self
                .edges
                .keys()
                .filter_map(|&(c, p)| {
                    if c == f {
                        Some(p)
                    } else if p == f {
                        Some(c)
                    } else {
                        None
                    }
                })
                .collect();
            next.sort();
            for n in next {
                if !visited.contains(&n) {
                    visited.push(n);
                    prev.insert(n, f);
                    queue.push_back(n);
                }
            }
        }
        Err(FrameError::NoPath {
            from: child,
            to: parent,
        })
    }

    /// `M_child^parent` along the shortest registered path.
    pub fn query(&self, child: FrameId, parent: FrameId) -> Result<Pose, FrameError> {
        let path = self.path(child, parent)?;
        self.query_along(&path)
    }
}
