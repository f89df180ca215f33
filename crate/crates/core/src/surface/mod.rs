//! Isosurfaces, shape normalization, and surface sampling.

mod mc;

pub use mc::{case_table, marching_cubes, CaseTable, ISO_NUDGE};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::{PointCloud, TriangleMesh, Vec3};

/// Bounding-sphere radius of a normalized shape.
pub const NORMALIZED_RADIUS: f64 = 0.5;

/// Uniform scale followed by a translation: `p -> scale * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + Vec3::from(self.translation)
    }

    pub fn inverse(&self) -> Self {
        let inv = 1.0 / self.scale;
        let t = -Vec3::from(self.translation) * inv;
        Self {
            scale: inv,
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        TriangleMesh::new(
            mesh.vertices().iter().map(|p| self.apply(p)).collect(),
            mesh.triangles().to_vec(),
        )
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> Result<PointCloud> {
        PointCloud::new(cloud.points().iter().map(|p| self.apply(p)).collect())
    }
}

/// Center of the axis-aligned bounds and the radius of the smallest sphere
/// around that center containing every point.
pub fn bounding_sphere(points: &[Vec3]) -> Option<(Vec3, f64)> {
    let first = points.first()?;
    let (lo, hi) = points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let center = (lo + hi) * 0.5;
    let radius = points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    Some((center, radius))
}

/// Center `mesh` at the origin with bounding-sphere radius 0.5.
///
/// The sphere is centered on the bounding box center. Returns the applied
/// transform so results can be mapped back with its inverse.
pub fn normalize_shape(mesh: &TriangleMesh) -> Result<(TriangleMesh, Similarity)> {
    if mesh.is_empty() {
        return Err(Error::contract("cannot normalize an empty mesh"));
    }
    let (center, radius) = bounding_sphere(mesh.vertices()).expect("non-empty mesh has vertices");
    if !(radius > f64::MIN_POSITIVE) {
        return Err(Error::degenerate("mesh has zero extent"));
    }
    let scale = NORMALIZED_RADIUS / radius;
    let t = -center * scale;
    let sim = Similarity {
        scale,
        translation: [t.x, t.y, t.z],
    };
    Ok((sim.apply_mesh(mesh)?, sim))
}

/// `n` points distributed uniformly by area over `mesh`.
///
/// Point `i` consumes outputs `3i..3i+3` of the seeded counter-based stream,
/// so the result is identical for any thread count.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0f64;
    for t in 0..mesh.triangles().len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::degenerate("mesh has zero surface area"));
    }
    let rng = SplitMix64::new(seed);
    let points: Vec<Vec3> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let target = rng.f64_at(3 * i) * total;
            let tri = cumulative
                .partition_point(|&c| c <= target)
                .min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(tri);
            let s = rng.f64_at(3 * i + 1).sqrt();
            let r = rng.f64_at(3 * i + 2);
            a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r)
        })
        .collect();
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_mesh(half: f64) -> TriangleMesh {
        crate::primitives::cuboid(Vec3::repeat(2.0 * half)).unwrap()
    }

    #[test]
    fn cube_normalization_scale() {
        let (m, sim) = normalize_shape(&cube_mesh(1.0)).unwrap();
        assert!((sim.scale - 0.5 / 3f64.sqrt()).abs() < 1e-15);
        let r = m.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalization_undoes_similarity() {
        let base = cube_mesh(0.3);
        let moved = Similarity {
            scale: 3.0,
            translation: [1.0, 2.0, 3.0],
        }
        .apply_mesh(&base)
        .unwrap();
        let (a, _) = normalize_shape(&base).unwrap();
        let (b, sim) = normalize_shape(&moved).unwrap();
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }
        let back = sim.inverse().apply_mesh(&b).unwrap();
        for (p, q) in back.vertices().iter().zip(moved.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_meshes() {
        let flat = TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(normalize_shape(&flat), Err(Error::Degenerate(_))));
        assert!(matches!(sample_surface(&flat, 10, 0), Err(Error::Degenerate(_))));
        assert!(matches!(normalize_shape(&TriangleMesh::empty()), Err(Error::Contract(_))));
    }

    #[test]
    fn sampling_is_reproducible_and_sized() {
        let m = cube_mesh(0.5);
        let a = sample_surface(&m, 1024, 9).unwrap();
        let b = sample_surface(&m, 1024, 9).unwrap();
        assert_eq!(a.len(), 1024);
        assert_eq!(a, b);
        assert_ne!(a, sample_surface(&m, 1024, 10).unwrap());
    }
}
