//! Reconstruction error over an elevation × azimuth grid of camera views.

use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::tensor::{write_tensor, Tensor};
use crate::pipeline::{reconstruct_and_evaluate, Pipeline};
use crate::surface::normalize_shape;
use crate::types::TriangleMesh;

/// Row centers from -90° to 90°: `-90 + (k + 0.5) * 180 / n`.
pub fn grid_elevations(n: usize) -> Vec<f64> {
    (0..n).map(|k| -90.0 + (k as f64 + 0.5) * 180.0 / n as f64).collect()
}

/// Columns `j * 360 / n`, starting at 0°.
pub fn grid_azimuths(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 * 360.0 / n as f64).collect()
}

/// Median best CD per view, row-major by elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGrid {
    pub elevations: Vec<f64>,
    pub azimuths: Vec<f64>,
    pub cds: Vec<f64>,
}

impl ViewGrid {
    pub fn n_elev(&self) -> usize {
        self.elevations.len()
    }

    pub fn n_azim(&self) -> usize {
        self.azimuths.len()
    }

    pub fn get(&self, elev: usize, azim: usize) -> f64 {
        self.cds[elev * self.n_azim() + azim]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::f32(
            vec![self.n_elev() as u64, self.n_azim() as u64],
            self.cds.iter().map(|&c| c as f32).collect(),
        )
        .expect("shape matches data")
    }

    pub fn write_voxb(&self, path: &Path) -> Result<()> {
        write_tensor(path, &self.to_tensor())
    }

    /// Heatmap with `cell` pixels per view, highest elevation on top, dark
    /// blue for the lowest CD and bright red for the highest.
    pub fn heatmap(&self, cell: u32) -> RgbImage {
        let finite = self.cds.iter().copied().filter(|c| c.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        let (w, h) = (self.n_azim() as u32, self.n_elev() as u32);
        RgbImage::from_fn(w * cell, h * cell, |x, y| {
            let (a, e) = ((x / cell) as usize, (h - 1 - y / cell) as usize);
            let c = self.get(e, a);
            if !c.is_finite() {
                return Rgb([255, 255, 255]);
            }
            let t = if hi > lo { (c - lo) / (hi - lo) } else { 0.0 };
            let ramp = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            Rgb([ramp(t), ramp(1.0 - (2.0 * t - 1.0).abs()) / 2, ramp(1.0 - t)])
        })
    }

    pub fn write_png(&self, path: &Path, cell: u32) -> Result<()> {
        self.heatmap(cell)
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::Io(io),
                other => Error::format(other.to_string()),
            })
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// For every view, reconstruct each mesh (normalized first) from that view
/// and take the median best CD.
pub fn viewpoint_grid(meshes: &[TriangleMesh], cfg: &PipelineConfig, n_elev: usize, n_azim: usize) -> Result<ViewGrid> {
    if meshes.is_empty() {
        return Err(Error::contract("viewpoint grid needs at least one mesh"));
    }
    if n_elev < 2 || n_azim < 2 {
        return Err(Error::contract(format!(
            "viewpoint grid must be at least 2x2, got {n_elev}x{n_azim}"
        )));
    }
    let pipeline = Pipeline::new(*cfg)?;
    let normalized = meshes
        .iter()
        .map(|m| normalize_shape(m).map(|(n, _)| n))
        .collect::<Result<Vec<_>>>()?;
    let elevations = grid_elevations(n_elev);
    let azimuths = grid_azimuths(n_azim);
    let jobs: Vec<(usize, usize, usize)> = (0..n_elev)
        .flat_map(|e| (0..n_azim).flat_map(move |a| (0..meshes.len()).map(move |m| (e, a, m))))
        .collect();
    let best: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(e, a, m)| {
            let camera = cfg.camera.with_view(elevations[e], azimuths[a]);
            let (_, sweep) = reconstruct_and_evaluate(&pipeline, &normalized[m], &camera)?;
            Ok(sweep.best().1)
        })
        .collect();
    let best = best.into_iter().collect::<Result<Vec<_>>>()?;
    let cds = best.chunks(meshes.len()).map(|c| median(&mut c.to_vec())).collect();
    Ok(ViewGrid {
        elevations,
        azimuths,
        cds,
    })
}
