//! Domain types shared by every stage.
//!
//! All of them validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across threads.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const POSE_TOLERANCE: f64 = 1e-6;

/// Rigid transform `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::contract("pose has non-finite entries"));
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Mat3::identity()).abs().max();
        if ortho_err > POSE_TOLERANCE {
            return Err(Error::contract(format!(
                "pose rotation is not orthonormal (|RᵀR - I| = {ortho_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > POSE_TOLERANCE {
            return Err(Error::contract(format!(
                "pose rotation has determinant {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation about `axis` (normalized internally) by `angle` radians.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Result<Self> {
        let axis = nalgebra::Unit::try_new(axis, 1e-12)
            .ok_or_else(|| Error::contract("rotation axis has zero length"))?;
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Per-pixel view-space depth with a foreground mask. Row-major, `v * width + u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    mask: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>, mask: Vec<bool>) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::contract("depth map dimensions overflow"))?;
        if values.len() != n || mask.len() != n {
            return Err(Error::contract(format!(
                "depth map {width}x{height} needs {n} values and mask entries, got {} and {}",
                values.len(),
                mask.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| mask[i] && !(values[i].is_finite() && values[i] > 0.0)) {
            return Err(Error::contract(format!(
                "masked-in depth at pixel {i} is {} (must be finite and > 0)",
                values[i]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            mask,
        })
    }

    /// Depth map whose mask is derived from the values: non-positive or
    /// non-finite entries are background.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        let mask = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() && v > 0.0 { v } else { 0.0 })
            .collect();
        Self::new(width, height, values, mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f32> {
        let i = v * self.width + u;
        self.mask[i].then_some(self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::contract(format!("point {i} has non-finite coordinates")));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
        }
    }

    pub fn concat(clouds: &[PointCloud]) -> PointCloud {
        PointCloud {
            points: clouds.iter().flat_map(|c| c.points.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::contract(format!("vertex {i} has non-finite coordinates")));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= nv) {
                return Err(Error::contract(format!(
                    "triangle {t} {tri:?} indexes past {nv} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::contract(format!("triangle {t} {tri:?} is degenerate")));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed volume via the divergence theorem; positive for outward-facing
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (b - a).norm().max((c - b).norm()).max((a - c).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn transformed(&self, pose: &Pose) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| pose.apply(p)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// V - E + F, counting only vertices referenced by a triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// True when every directed edge has exactly one opposite twin, i.e. the
    /// mesh is closed, 2-manifold along edges, and consistently oriented.
    pub fn is_closed_oriented(&self) -> bool {
        let mut directed: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        directed.sort_unstable();
        if directed.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        directed
            .iter()
            .all(|&(a, b)| directed.binary_search(&(b, a)).is_ok())
    }
}

/// Equirectangular grid of inward radial distances on the unit sphere.
///
/// Row-major with latitude rows: index `lat * n_lon + lon`. Longitude is
/// periodic. Cells with `mask == false` hold the value 0 and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalMap {
    n_lon: usize,
    n_lat: usize,
    values: Vec<f32>,
    mask: Vec<bool>,
}

impl SphericalMap {
    pub fn new(n_lon: usize, n_lat: usize, values: Vec<f32>, mask: Vec<bool>) -> Result<Self> {
        let n = n_lon * n_lat;
        if n_lon == 0 || n_lat == 0 {
            return Err(Error::contract("spherical map needs a non-empty grid"));
        }
        if values.len() != n || mask.len() != n {
            return Err(Error::contract(format!(
                "spherical map {n_lon}x{n_lat} needs {n} cells, got {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| mask[i] && !(0.0..=1.0).contains(&values[i])) {
            return Err(Error::contract(format!(
                "observed spherical cell {i} has value {} outside [0, 1]",
                values[i]
            )));
        }
        let values = values
            .into_iter()
            .zip(&mask)
            .map(|(v, &m)| if m { v } else { 0.0 })
            .collect();
        Ok(Self {
            n_lon,
            n_lat,
            values,
            mask,
        })
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn index(&self, lon: usize, lat: usize) -> usize {
        lat * self.n_lon + lon
    }

    pub fn get(&self, lon: usize, lat: usize) -> Option<f32> {
        let i = self.index(lon % self.n_lon, lat);
        self.mask[i].then_some(self.values[i])
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|m| *m)
    }
}

/// Axis-aligned world-space cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub center: [f64; 3],
    pub side: f64,
}

impl Extent {
    pub fn new(center: Vec3, side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::contract(format!("invalid extent side {side}")));
        }
        Ok(Self {
            center: [center.x, center.y, center.z],
            side,
        })
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    pub fn min_corner(&self) -> Vec3 {
        self.center().add_scalar(-0.5 * self.side)
    }

    pub fn max_corner(&self) -> Vec3 {
        self.center().add_scalar(0.5 * self.side)
    }
}

impl Default for Extent {
    /// The cube `[-0.5, 0.5]³` that holds a normalized shape.
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            side: 1.0,
        }
    }
}

/// Cubic occupancy grid with values in `[0, 1]`.
///
/// Index layout is `(ix * n + iy) * n + iz`; voxel `(i, j, k)` has its center
/// at `min_corner + (i + 0.5, j + 0.5, k + 0.5) * voxel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    resolution: usize,
    extent: Extent,
    values: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(resolution: usize, extent: Extent, values: Vec<f32>) -> Result<Self> {
        let n = resolution
            .checked_pow(3)
            .ok_or_else(|| Error::contract("voxel resolution overflows"))?;
        if resolution == 0 {
            return Err(Error::contract("voxel resolution must be positive"));
        }
        if values.len() != n {
            return Err(Error::contract(format!(
                "voxel grid of resolution {resolution} needs {n} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract(format!(
                "voxel {i} has value {} outside [0, 1]",
                values[i]
            )));
        }
        Ok(Self {
            resolution,
            extent,
            values,
        })
    }

    pub fn zeros(resolution: usize, extent: Extent) -> Result<Self> {
        Self::new(resolution, extent, vec![0.0; resolution.pow(3)])
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> &Extent {
        &self.extent
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn voxel_size(&self) -> f64 {
        self.extent.side / self.resolution as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.voxel_size();
        self.extent.min_corner() + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    pub fn same_lattice(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution && self.extent == other.extent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_rejects_non_rotations() {
        assert!(Pose::new(Mat3::identity() * 2.0, Vec3::zeros()).is_err());
        let reflection = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(reflection, Vec3::zeros()).is_err());
        assert!(Pose::new(Mat3::identity(), Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        let p = Pose::from_axis_angle(Vec3::z(), 0.3, Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let q = p.compose(&p.inverse());
        assert!((q.rotation() - Mat3::identity()).abs().max() < 1e-12);
        assert!(q.translation().norm() < 1e-12);
    }

    #[test]
    fn depth_map_validation() {
        assert!(DepthMap::new(2, 2, vec![1.0; 3], vec![true; 4]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, -1.0], vec![true, true]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, f32::NAN], vec![true, true]).is_err());
        // masked-out garbage is fine
        let d = DepthMap::new(2, 1, vec![1.0, -1.0], vec![true, false]).unwrap();
        assert_eq!(d.valid_count(), 1);
        let d = DepthMap::from_values(3, 1, vec![0.0, 2.0, -5.0]).unwrap();
        assert_eq!(d.mask(), &[false, true, false]);
    }

    #[test]
    fn mesh_validation() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!((m.total_area() - 0.5).abs() < 1e-15);
        assert!(!m.is_closed_oriented());
        assert!(PointCloud::new(vec![Vec3::new(0.0, f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn spherical_and_voxel_validation() {
        assert!(SphericalMap::new(2, 2, vec![0.5, 1.5, 0.0, 0.0], vec![true; 4]).is_err());
        let s = SphericalMap::new(2, 2, vec![0.5, 1.5, 0.0, 0.0], vec![true, false, true, true])
            .unwrap();
        assert_eq!(s.values()[1], 0.0, "masked-out cells carry the zero sentinel");
        assert!(VoxelGrid::new(2, Extent::default(), vec![0.0; 7]).is_err());
        assert!(VoxelGrid::new(2, Extent::default(), vec![1.5; 8]).is_err());
        let g = VoxelGrid::zeros(4, Extent::default()).unwrap();
        assert_eq!(g.voxel_center(0, 0, 0), Vec3::repeat(-0.375));
    }
}
