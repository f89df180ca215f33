//! File formats: VOXB tensors with JSON sidecars, OBJ meshes, PFM depth.

pub mod obj;
pub mod pfm;
pub mod tensor;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DepthMap, Extent, SphericalMap, VoxelGrid};
use tensor::{read_tensor, write_tensor, Tensor};

pub use obj::{read_mesh_obj, read_points_obj, write_mesh_obj, write_points_obj};
pub use pfm::{read_depth_pfm, write_depth_pfm};
pub use tensor::{read_tensor as read_voxb, write_tensor as write_voxb};

pub const SIDECAR_VERSION: u32 = 1;
pub const SPHERICAL_PARAMETERIZATION: &str = "equirect-cell-center-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelSidecar {
    pub kind: String,
    pub format_version: u32,
    pub resolution: usize,
    pub extent: Extent,
    pub layout: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalSidecar {
    pub kind: String,
    pub format_version: u32,
    pub parameterization: String,
    pub n_lon: usize,
    pub n_lat: usize,
    pub values: String,
    pub mask: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn mask_path(path: &Path) -> PathBuf {
    path.with_extension("mask.voxb")
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| {
        Error::format(format!("{}: {e}", path.as_ref().display()))
    })
}

/// Write `grid` to `path` (a `.voxb` file) plus its `.json` sidecar.
pub fn write_voxel_grid(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    let path = path.as_ref();
    let n = grid.resolution() as u64;
    write_tensor(path, &Tensor::f32(vec![n, n, n], grid.values().to_vec())?)?;
    write_json(
        sidecar_path(path),
        &VoxelSidecar {
            kind: "voxel_grid".into(),
            format_version: SIDECAR_VERSION,
            resolution: grid.resolution(),
            extent: *grid.extent(),
            layout: "xyz-row-major".into(),
        },
    )
}

pub fn read_voxel_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let meta: VoxelSidecar = read_json(sidecar_path(path))?;
    if meta.kind != "voxel_grid" || meta.format_version != SIDECAR_VERSION {
        return Err(Error::format(format!(
            "sidecar describes {} v{}, expected voxel_grid v{SIDECAR_VERSION}",
            meta.kind, meta.format_version
        )));
    }
    let t = read_tensor(path)?;
    let n = meta.resolution as u64;
    if t.shape() != [n, n, n] {
        return Err(Error::corruption(format!(
            "voxel tensor shape {:?} disagrees with sidecar resolution {n}",
            t.shape()
        )));
    }
    VoxelGrid::new(meta.resolution, meta.extent, t.into_f32()?)
        .map_err(|e| Error::format(format!("invalid voxel grid: {e}")))
}

/// Write `smap` values to `path`, its mask next to it, and the sidecar.
pub fn write_spherical_map(path: impl AsRef<Path>, smap: &SphericalMap) -> Result<()> {
    let path = path.as_ref();
    let shape = vec![smap.n_lat() as u64, smap.n_lon() as u64];
    let mpath = mask_path(path);
    write_tensor(path, &Tensor::f32(shape.clone(), smap.values().to_vec())?)?;
    write_tensor(
        &mpath,
        &Tensor::u8(shape, smap.mask().iter().map(|&m| m as u8).collect())?,
    )?;
    write_json(
        sidecar_path(path),
        &SphericalSidecar {
            kind: "spherical_map".into(),
            format_version: SIDECAR_VERSION,
            parameterization: SPHERICAL_PARAMETERIZATION.into(),
            n_lon: smap.n_lon(),
            n_lat: smap.n_lat(),
            values: file_name(path),
            mask: file_name(&mpath),
        },
    )
}

pub fn read_spherical_map(path: impl AsRef<Path>) -> Result<SphericalMap> {
    let path = path.as_ref();
    let meta: SphericalSidecar = read_json(sidecar_path(path))?;
    if meta.kind != "spherical_map" || meta.format_version != SIDECAR_VERSION {
        return Err(Error::format(format!(
            "sidecar describes {} v{}, expected spherical_map v{SIDECAR_VERSION}",
            meta.kind, meta.format_version
        )));
    }
    if meta.parameterization != SPHERICAL_PARAMETERIZATION {
        return Err(Error::format(format!(
            "unsupported parameterization {:?}",
            meta.parameterization
        )));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let values = read_tensor(dir.join(&meta.values))?;
    let mask = read_tensor(dir.join(&meta.mask))?;
    let shape = [meta.n_lat as u64, meta.n_lon as u64];
    if values.shape() != shape || mask.shape() != shape {
        return Err(Error::corruption(format!(
            "spherical tensors {:?}/{:?} disagree with sidecar {}x{}",
            values.shape(),
            mask.shape(),
            meta.n_lon,
            meta.n_lat
        )));
    }
    let mask = mask.into_u8()?;
    if mask.iter().any(|&m| m > 1) {
        return Err(Error::corruption("spherical mask entries must be 0 or 1"));
    }
    SphericalMap::new(
        meta.n_lon,
        meta.n_lat,
        values.into_f32()?,
        mask.into_iter().map(|m| m == 1).collect(),
    )
    .map_err(|e| Error::format(format!("invalid spherical map: {e}")))
}

/// Depth as a rank-2 `[height, width]` f32 VOXB tensor; background is 0.
pub fn write_depth_voxb(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let data = depth
        .values()
        .iter()
        .zip(depth.mask())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    write_tensor(
        path,
        &Tensor::f32(vec![depth.height() as u64, depth.width() as u64], data)?,
    )
}

pub fn read_depth_voxb(path: impl AsRef<Path>) -> Result<DepthMap> {
    let t = read_tensor(path)?;
    if t.shape().len() != 2 {
        return Err(Error::format(format!(
            "depth tensor must be rank 2, got shape {:?}",
            t.shape()
        )));
    }
    let (h, w) = (t.shape()[0] as usize, t.shape()[1] as usize);
    DepthMap::from_values(w, h, t.into_f32()?)
}

/// Read a depth map by extension: `.pfm` (optional mask PFM) or `.voxb`.
pub fn read_depth(path: impl AsRef<Path>, mask: Option<&Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("voxb") => read_depth_voxb(path),
        _ => read_depth_pfm(path, mask),
    }
}

pub fn write_depth(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("voxb") => write_depth_voxb(path, depth),
        _ => write_depth_pfm(path, depth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_and_spherical_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let extent = Extent::new(crate::types::Vec3::new(0.1, 0.0, -0.2), 2.0).unwrap();
        let vals: Vec<f32> = (0..27).map(|i| i as f32 / 26.0).collect();
        let g = VoxelGrid::new(3, extent, vals).unwrap();
        let p = dir.path().join("g.voxb");
        write_voxel_grid(&p, &g).unwrap();
        assert_eq!(read_voxel_grid(&p).unwrap(), g);

        let s = SphericalMap::new(4, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8], vec![
            true, false, true, true, true, true, false, true,
        ])
        .unwrap();
        let p = dir.path().join("s.voxb");
        write_spherical_map(&p, &s).unwrap();
        assert!(dir.path().join("s.mask.voxb").exists());
        assert!(dir.path().join("s.json").exists());
        assert_eq!(read_spherical_map(&p).unwrap(), s);
    }

    #[test]
    fn sidecar_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let g = VoxelGrid::zeros(2, Extent::default()).unwrap();
        let p = dir.path().join("g.voxb");
        write_voxel_grid(&p, &g).unwrap();
        let side = sidecar_path(&p);
        let text = std::fs::read_to_string(&side).unwrap();
        std::fs::write(&side, text.replacen("{", "{\"typo\": 1,", 1)).unwrap();
        assert!(matches!(read_voxel_grid(&p), Err(Error::Format(_))));
    }
}
