//! Constructed-mesh stand-in: an occupancy set of square cells laid out on
//! each scene surface, grown by scanning point-cloud frames.

use rustc_hash::FxHashMap;

use super::camera::PointCloudFrame;
use super::scene::{Color, Hit, SceneModel, Surface};
use crate::geometry::Vec3;

/// Tone the mesh colours are pulled toward.
pub const SEPIA: Color = [112, 66, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub surface: u32,
    pub u: i64,
    pub v: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshModel {
    cell_size: f64,
    tint_strength: f64,
    surfaces: Vec<Surface>,
    bounds: (Vec3, Vec3),
    /// Box extents, for skipping faces far from a point.
    boxes: Vec<(Vec3, Vec3)>,
    cells: FxHashMap<CellKey, Color>,
}

/// Blends `base` toward [`SEPIA`] by `strength`; if rounding would leave the
/// colour unchanged, the blend goes toward the farther of black and white,
/// and as a last resort one channel is nudged by a unit step.
pub fn tint(base: Color, strength: f64) -> Color {
    let blend = |toward: Color| -> Color {
        let mut out = [0u8; 3];
        for i in 0..3 {
            let c = base[i] as f64 * (1.0 - strength) + toward[i] as f64 * strength;
            out[i] = c.round().clamp(0.0, 255.0) as u8;
        }
        out
    };
    let t = blend(SEPIA);
    if t != base {
        return t;
    }
    let lum: u32 = base.iter().map(|&c| c as u32).sum();
    let t = blend(if lum > 382 { [0, 0, 0] } else { [255, 255, 255] });
    if t != base {
        return t;
    }
    let mut t = base;
    t[0] = if base[0] < 255 { base[0] + 1 } else { 254 };
    t
}

impl MeshModel {
    pub fn new(scene: &SceneModel, cell_size: f64, tint_strength: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        assert!(tint_strength > 0.0 && tint_strength <= 1.0, "tint strength must be in (0, 1]");
        Self {
            cell_size,
            tint_strength,
            surfaces: scene.surfaces().to_vec(),
            bounds: scene.bounds(),
            boxes: scene.boxes().iter().map(|b| (Vec3::from(b.min), Vec3::from(b.max))).collect(),
            cells: FxHashMap::default(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        self.cells.contains_key(key)
    }

    pub fn color(&self, key: &CellKey) -> Option<Color> {
        self.cells.get(key).copied()
    }

    /// Scanned cells in key order.
    pub fn sorted_cells(&self) -> Vec<(CellKey, Color)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_by_key(|(k, _)| *k);
        v
    }

    pub fn key_on(&self, surface: usize, point: &Vec3) -> CellKey {
        let (u, v) = self.surfaces[surface].uv(point);
        CellKey {
            surface: surface as u32,
            u: (u / self.cell_size).floor() as i64,
            v: (v / self.cell_size).floor() as i64,
        }
    }

    pub fn key_of_hit(&self, hit: &Hit) -> CellKey {
        self.key_on(hit.surface, &hit.point)
    }

    /// Surface closest to a world point, within half a cell.
    fn locate(&self, p: &Vec3) -> Option<usize> {
        let snap = self.cell_size / 2.0;
        let (lo, hi) = self.bounds;
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            if let Some((bl, bh)) = self.boxes.get(i / 6) {
                if (0..3).any(|k| p[k] < bl[k] - snap || p[k] > bh[k] + snap) {
                    continue;
                }
            }
            let d = s.signed_distance(p);
            if d.abs() > snap || best.is_some_and(|(_, b)| d.abs() >= b) {
                continue;
            }
            let on = p - s.normal * d;
            let inside = match s.extent {
                Some((eu, ev)) => {
                    let (u, v) = s.uv(&on);
                    (-1e-9..=eu + 1e-9).contains(&u) && (-1e-9..=ev + 1e-9).contains(&v)
                }
                None => (0..3).all(|k| on[k] >= lo[k] - 1e-9 && on[k] <= hi[k] + 1e-9),
            };
            if inside {
                best = Some((i, d.abs()));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Marks every cell containing a frame point as scanned. Returns the
    /// number of newly scanned cells.
    pub fn scan(&mut self, frame: &PointCloudFrame) -> usize {
        let before = self.cells.len();
        for (p, cp) in frame.world_points().zip(&frame.points) {
            let Some(s) = self.locate(&p) else {
                continue;
            };
            let on = p - self.surfaces[s].normal * self.surfaces[s].signed_distance(&p);
            let key = self.key_on(s, &on);
            let strength = self.tint_strength;
            self.cells.entry(key).or_insert_with(|| tint(cp.color, strength));
        }
        self.cells.len() - before
    }
}

pub fn scan_mesh(mesh: &MeshModel, frame: &PointCloudFrame) -> MeshModel {
    let mut m = mesh.clone();
    m.scan(frame);
    m
}
