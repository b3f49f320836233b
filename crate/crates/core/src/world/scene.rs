//! Synthetic environment built from axis-aligned boxes and bounded planes.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

pub type Color = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub color: Color,
}

/// Infinite plane clipped to the scene bounds; the normal points toward the
/// side it is visible from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePlane {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub color: Color,
}

/// One planar patch. Box faces are bounded rectangles; scene planes are
/// bounded only by the scene bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub origin: Vec3,
    pub normal: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    /// In-plane extent along `u_axis`/`v_axis`, `None` for unbounded planes.
    pub extent: Option<(f64, f64)>,
    pub color: Color,
}

impl Surface {
    fn from_plane(origin: Vec3, normal: Vec3, color: Color) -> Self {
        let normal = normal.normalize();
        // in-plane basis seeded from the world axis least aligned with the normal
        let seed = if normal.x.abs() <= normal.y.abs() && normal.x.abs() <= normal.z.abs() {
            Vec3::x()
        } else if normal.y.abs() <= normal.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u_axis = normal.cross(&seed).normalize();
        let v_axis = normal.cross(&u_axis);
        Self {
            origin,
            normal,
            u_axis,
            v_axis,
            extent: None,
            color,
        }
    }

    /// In-plane coordinates of `p`.
    pub fn uv(&self, p: &Vec3) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.u_axis), d.dot(&self.v_axis))
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    pub(crate) fn within_extent(&self, p: &Vec3) -> bool {
        match self.extent {
            None => true,
            Some((eu, ev)) => {
                let (u, v) = self.uv(p);
                (0.0..=eu).contains(&u) && (0.0..=ev).contains(&v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub point: Vec3,
    pub surface: usize,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    boxes: Vec<SceneBox>,
    planes: Vec<ScenePlane>,
    bounds_min: Vec3,
    bounds_max: Vec3,
    surfaces: Vec<Surface>,
}

impl SceneModel {
    pub fn new(boxes: Vec<SceneBox>, planes: Vec<ScenePlane>, bounds_min: [f64; 3], bounds_max: [f64; 3]) -> Self {
        let mut surfaces = Vec::with_capacity(boxes.len() * 6 + planes.len());
        for b in &boxes {
            surfaces.extend(box_faces(b));
        }
        for p in &planes {
            surfaces.push(Surface::from_plane(Vec3::from(p.point), Vec3::from(p.normal), p.color));
        }
        Self {
            boxes,
            planes,
            bounds_min: Vec3::from(bounds_min),
            bounds_max: Vec3::from(bounds_max),
            surfaces,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), [0.0; 3], [0.0; 3])
    }

    pub fn boxes(&self) -> &[SceneBox] {
        &self.boxes
    }

    pub fn planes(&self) -> &[ScenePlane] {
        &self.planes
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.bounds_min, self.bounds_max)
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn in_bounds(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.bounds_min[i] - tol && p[i] <= self.bounds_max[i] + tol)
    }

    /// Nearest front-facing surface hit along the unit direction `dir`
    /// within `max_range`. Ties go to the lower surface index.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (bi, b) in self.boxes.iter().enumerate() {
            let Some((t, face)) = slab_entry(b, origin, dir) else {
                continue;
            };
            if t <= 1e-9 || t > max_range || best.is_some_and(|h| t >= h.distance) {
                continue;
            }
            best = Some(Hit {
                distance: t,
                point: origin + dir * t,
                surface: bi * 6 + face,
                color: b.color,
            });
        }
        let first_plane = self.boxes.len() * 6;
        for (i, s) in self.surfaces.iter().enumerate().skip(first_plane) {
            let denom = dir.dot(&s.normal);
            if denom >= 0.0 {
                continue;
            }
            let t = (s.origin - origin).dot(&s.normal) / denom;
            if t <= 1e-9 || t > max_range || best.is_some_and(|b| t >= b.distance) {
                continue;
            }
            let p = origin + dir * t;
            if !s.within_extent(&p) || !self.in_bounds(&p, 1e-9) {
                continue;
            }
            best = Some(Hit {
                distance: t,
                point: p,
                surface: i,
                color: s.color,
            });
        }
        best
    }
}

/// Entry distance and face index (in [`box_faces`] order) of a ray that
/// enters the box from outside. Rays starting inside see no face.
fn slab_entry(b: &SceneBox, origin: &Vec3, dir: &Vec3) -> Option<(f64, usize)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut face = 0;
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < b.min[k] || origin[k] > b.max[k] {
                return None;
            }
            continue;
        }
        let t1 = (b.min[k] - origin[k]) / dir[k];
        let t2 = (b.max[k] - origin[k]) / dir[k];
        let (tn, tf, f) = if dir[k] > 0.0 { (t1, t2, 2 * k) } else { (t2, t1, 2 * k + 1) };
        if tn > t_near {
            t_near = tn;
            face = f;
        }
        t_far = t_far.min(tf);
    }
    (t_near <= t_far && t_near.is_finite()).then_some((t_near, face))
}

fn box_faces(b: &SceneBox) -> [Surface; 6] {
    let lo = Vec3::from(b.min);
    let hi = Vec3::from(b.max);
    let size = hi - lo;
    let face = |origin: Vec3, normal: Vec3, u_axis: Vec3, v_axis: Vec3, eu: f64, ev: f64| Surface {
        origin,
        normal,
        u_axis,
        v_axis,
        extent: Some((eu, ev)),
        color: b.color,
    };
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    [
        face(lo, -x, y, z, size.y, size.z),
        face(Vec3::new(hi.x, lo.y, lo.z), x, y, z, size.y, size.z),
        face(lo, -y, x, z, size.x, size.z),
        face(Vec3::new(lo.x, hi.y, lo.z), y, x, z, size.x, size.z),
        face(lo, -z, x, y, size.x, size.y),
        face(Vec3::new(lo.x, lo.y, hi.z), z, x, y, size.x, size.y),
    ]
}
