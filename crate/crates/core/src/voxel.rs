//! Point cloud to voxel projection, its directional derivative, voxel fusion,
//! and rigid resampling.
//!
//! Occupancy rule: a voxel holding points gets `1 - mean distance` from those
//! points to its center, with distances in voxel side lengths. Occupied
//! values therefore lie in `[1 - √3/2, 1]`; empty voxels are exactly 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Extent, PointCloud, Pose, Vec3, VoxelGrid};

/// Smallest value an occupied voxel can take.
pub const MIN_OCCUPIED: f64 = 1.0 - 0.866_025_403_784_438_6;

const SNAP: f64 = 1e-9;

/// Cell-binning of a point set against a voxel lattice.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    n: usize,
    min: Vec3,
    h: f64,
}

impl Lattice {
    fn new(resolution: usize, extent: &Extent) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::contract(format!(
                "voxel resolution must be >= 2, got {resolution}"
            )));
        }
        Ok(Self {
            n: resolution,
            min: extent.min_corner(),
            h: extent.side / resolution as f64,
        })
    }

    /// Linear cell index, or `None` outside the extent. Points on the far
    /// faces belong to the last cell.
    #[inline]
    fn cell_of(&self, p: &Vec3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let q = (p[k] - self.min[k]) / self.h;
            if !(q >= 0.0 && q <= self.n as f64) {
                return None;
            }
            idx[k] = (q.floor() as usize).min(self.n - 1);
        }
        Some((idx[0] * self.n + idx[1]) * self.n + idx[2])
    }

    #[inline]
    fn center(&self, cell: usize) -> Vec3 {
        let n = self.n;
        let (i, j, k) = (cell / (n * n), (cell / n) % n, cell % n);
        self.min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.h
    }
}

/// Occupied cells with full-precision values, sorted by cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub resolution: usize,
    pub extent: Extent,
    pub cells: Vec<(usize, f64)>,
    /// Points that fell outside the extent.
    pub discarded: usize,
}

/// The occupancy rule evaluated in f64. Per-cell distances are summed in
/// sorted order, so the result does not depend on point order.
pub fn occupancy(pc: &PointCloud, resolution: usize, extent: &Extent) -> Result<Occupancy> {
    let lat = Lattice::new(resolution, extent)?;
    let mut binned: Vec<(usize, f64)> = Vec::with_capacity(pc.len());
    let mut discarded = 0;
    for p in pc.points() {
        match lat.cell_of(p) {
            Some(c) => binned.push((c, (p - lat.center(c)).norm() / lat.h)),
            None => discarded += 1,
        }
    }
    binned.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut cells = Vec::new();
    let mut start = 0;
    while start < binned.len() {
        let cell = binned[start].0;
        let mut end = start;
        let mut sum = 0.0;
        while end < binned.len() && binned[end].0 == cell {
            sum += binned[end].1;
            end += 1;
        }
        cells.push((cell, 1.0 - sum / (end - start) as f64));
        start = end;
    }
    Ok(Occupancy {
        resolution,
        extent: *extent,
        cells,
        discarded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Voxelization {
    pub grid: VoxelGrid,
    pub discarded: usize,
}

pub fn pointcloud_to_voxels(pc: &PointCloud, resolution: usize, extent: &Extent) -> Result<Voxelization> {
    let occ = occupancy(pc, resolution, extent)?;
    let mut values = vec![0.0f32; resolution.pow(3)];
    for &(c, v) in &occ.cells {
        values[c] = v.clamp(0.0, 1.0) as f32;
    }
    Ok(Voxelization {
        grid: VoxelGrid::new(resolution, *extent, values)?,
        discarded: occ.discarded,
    })
}

/// Directional derivative of every voxel value when point `i` moves along
/// `perturbations[i]` (world units). Cell membership is held fixed; a point
/// sitting exactly on its voxel center contributes zero. Dense, same layout
/// as [`VoxelGrid`].
pub fn voxelize_jvp(
    pc: &PointCloud,
    resolution: usize,
    extent: &Extent,
    perturbations: &[Vec3],
) -> Result<Vec<f64>> {
    let lat = Lattice::new(resolution, extent)?;
    if perturbations.len() != pc.len() {
        return Err(Error::contract(format!(
            "{} perturbations for {} points",
            perturbations.len(),
            pc.len()
        )));
    }
    if perturbations.iter().any(|u| !u.iter().all(|c| c.is_finite())) {
        return Err(Error::contract("perturbations must be finite"));
    }
    let cells: Vec<Option<usize>> = pc.points().iter().map(|p| lat.cell_of(p)).collect();
    let mut counts = vec![0u32; resolution.pow(3)];
    for c in cells.iter().flatten() {
        counts[*c] += 1;
    }
    let mut delta = vec![0.0f64; resolution.pow(3)];
    for ((p, u), cell) in pc.points().iter().zip(perturbations).zip(&cells) {
        let Some(c) = *cell else { continue };
        let r = p - lat.center(c);
        let dist = r.norm();
        if dist > 0.0 {
            delta[c] -= r.dot(u) / (dist * lat.h * counts[c] as f64);
        }
    }
    Ok(delta)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Max,
    Average,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(FusionMode::Max),
            "average" | "mean" => Ok(FusionMode::Average),
            other => Err(Error::contract(format!("unknown fusion mode {other:?}"))),
        }
    }
}

pub fn fuse_voxels(surface: &VoxelGrid, coarse: &VoxelGrid, mode: FusionMode) -> Result<VoxelGrid> {
    if !surface.same_lattice(coarse) {
        return Err(Error::contract(format!(
            "cannot fuse grids with resolutions {}/{} and extents {:?}/{:?}",
            surface.resolution(),
            coarse.resolution(),
            surface.extent(),
            coarse.extent()
        )));
    }
    let values = surface
        .values()
        .iter()
        .zip(coarse.values())
        .map(|(&a, &b)| match mode {
            FusionMode::Max => a.max(b),
            FusionMode::Average => ((a as f64 + b as f64) * 0.5) as f32,
        })
        .collect();
    VoxelGrid::new(surface.resolution(), *surface.extent(), values)
}

/// Combines the depth-derived and spherical-derived grids into the output.
pub trait VoxelRefiner: Send + Sync {
    fn name(&self) -> &str;
    fn refine(&self, surface: &VoxelGrid, coarse: &VoxelGrid) -> Result<VoxelGrid>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FusionRefiner {
    pub mode: FusionMode,
}

impl VoxelRefiner for FusionRefiner {
    fn name(&self) -> &str {
        match self.mode {
            FusionMode::Max => "fuse-max",
            FusionMode::Average => "fuse-average",
        }
    }

    fn refine(&self, surface: &VoxelGrid, coarse: &VoxelGrid) -> Result<VoxelGrid> {
        fuse_voxels(surface, coarse, self.mode)
    }
}

/// Move the grid's content by `pose`: output(x) = input(pose⁻¹ x), trilinear,
/// zero outside the source extent.
pub fn resample_pose(grid: &VoxelGrid, pose: &Pose) -> Result<VoxelGrid> {
    let n = grid.resolution();
    let h = grid.voxel_size();
    let min = grid.extent().min_corner();
    let inv = pose.inverse();
    let src = grid.values();
    let at = |i: isize, j: isize, k: isize| -> f64 {
        let n = n as isize;
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            0.0
        } else {
            src[((i * n + j) * n + k) as usize] as f64
        }
    };
    let snap = |q: f64| {
        let r = q.round();
        if (q - r).abs() < SNAP {
            r
        } else {
            q
        }
    };
    let slabs: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(n * n);
            for j in 0..n {
                for k in 0..n {
                    let x = grid.voxel_center(i, j, k);
                    let s = inv.apply(&x);
                    let q = ((s - min) / h).add_scalar(-0.5).map(snap);
                    let limit = n as f64 - 0.5;
                    if q.iter().any(|&c| !(-0.5..=limit).contains(&c)) {
                        out.push(0.0);
                        continue;
                    }
                    let base = q.map(f64::floor);
                    let f = q - base;
                    let (bi, bj, bk) = (base.x as isize, base.y as isize, base.z as isize);
                    let mut acc = 0.0;
                    for (di, wi) in [(0, 1.0 - f.x), (1, f.x)] {
                        for (dj, wj) in [(0, 1.0 - f.y), (1, f.y)] {
                            for (dk, wk) in [(0, 1.0 - f.z), (1, f.z)] {
                                let w = wi * wj * wk;
                                if w != 0.0 {
                                    acc += w * at(bi + di, bj + dj, bk + dk);
                                }
                            }
                        }
                    }
                    out.push(acc.clamp(0.0, 1.0) as f32);
                }
            }
            out
        })
        .collect();
    VoxelGrid::new(n, *grid.extent(), slabs.concat())
}
