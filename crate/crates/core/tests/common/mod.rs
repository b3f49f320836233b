//! Helpers shared by the integration tests: seeded random poses and a
//! plain-array homogeneous-matrix implementation used as an oracle.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use televiz::geometry::{Pose, Vec3};

pub type Mat4 = [[f64; 4]; 4];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed rotation as raw `(w, x, y, z)`.
pub fn random_quat(rng: &mut impl Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-6 {
            return q.map(|c| c / n);
        }
    }
}

pub fn random_vec(rng: &mut impl Rng, scale: f64) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(-scale..scale))
}

/// A random pose and its matrix, built from the same raw numbers.
pub fn random_pair(rng: &mut impl Rng, scale: f64) -> (Pose, Mat4) {
    let q = random_quat(rng);
    let t = random_vec(rng, scale);
    (
        Pose::from_quaternion(q[0], q[1], q[2], q[3], Vec3::new(t[0], t[1], t[2])),
        matrix(q, t),
    )
}

pub fn random_pose(rng: &mut impl Rng, scale: f64) -> Pose {
    random_pair(rng, scale).0
}

/// Homogeneous matrix of a unit quaternion `(w, x, y, z)` and translation.
pub fn matrix(q: [f64; 4], t: [f64; 3]) -> Mat4 {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), t[0]],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), t[1]],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Inverse of a rigid transform: `[R^T | -R^T t]`.
pub fn rigid_inverse(m: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
        out[i][3] = -(0..3).map(|k| m[k][i] * m[k][3]).sum::<f64>();
    }
    out[3][3] = 1.0;
    out
}

pub fn chain(ms: &[&Mat4]) -> Mat4 {
    ms.iter().fold(identity(), |acc, m| mul(&acc, m))
}

pub fn identity() -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

pub fn pose_matrix(p: &Pose) -> Mat4 {
    let q = p.rotation.quaternion();
    let t = p.translation;
    matrix([q.w, q.i, q.j, q.k], [t.x, t.y, t.z])
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

pub fn apply(m: &Mat4, p: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3])
}
