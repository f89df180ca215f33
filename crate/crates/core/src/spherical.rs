//! Spherical maps: ray casting from the unit sphere, back-projection,
//! longitude padding, and map completion.
//!
//! Parameterization: cell `(lon, lat)` has its center at longitude
//! `(lon + 0.5) * 2π / n_lon` and latitude `-π/2 + (lat + 0.5) * π / n_lat`.
//! The polar axis is `+z`. A cell stores the distance travelled from the
//! sphere point toward the origin before the first surface hit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bvh, Ray};
use crate::types::{PointCloud, SphericalMap, TriangleMesh, Vec3};

pub const MIN_SPHERICAL_RES: usize = 4;
const UNIT_SPHERE_SLACK: f64 = 1e-9;

/// Unit direction through the center of cell `(lon, lat)`.
pub fn cell_direction(lon: usize, lat: usize, n_lon: usize, n_lat: usize) -> Vec3 {
    let phi = (lon as f64 + 0.5) * std::f64::consts::TAU / n_lon as f64;
    let theta = -std::f64::consts::FRAC_PI_2 + (lat as f64 + 0.5) * std::f64::consts::PI / n_lat as f64;
    Vec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin())
}

/// Cast one ray per cell from the unit sphere toward the origin and record
/// the distance to the first surface hit. Rays that reach the origin
/// without a hit leave the cell unobserved.
pub fn mesh_to_spherical(mesh: &TriangleMesh, n_lon: usize, n_lat: usize) -> Result<SphericalMap> {
    if n_lon < MIN_SPHERICAL_RES || n_lat < MIN_SPHERICAL_RES {
        return Err(Error::contract(format!(
            "spherical resolution {n_lon}x{n_lat} below {MIN_SPHERICAL_RES}x{MIN_SPHERICAL_RES}"
        )));
    }
    if let Some(v) = mesh.vertices().iter().find(|v| v.norm() > 1.0 + UNIT_SPHERE_SLACK) {
        return Err(Error::contract(format!(
            "mesh vertex {v:?} lies outside the unit sphere; normalize first"
        )));
    }
    let bvh = Bvh::build(mesh);
    let rows: Vec<Vec<Option<f32>>> = (0..n_lat)
        .into_par_iter()
        .map(|lat| {
            (0..n_lon)
                .map(|lon| {
                    let d = cell_direction(lon, lat, n_lon, n_lat);
                    bvh.closest_hit(&Ray { origin: d, dir: -d }, 1.0)
                        .map(|h| h.t.clamp(0.0, 1.0) as f32)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n_lon * n_lat);
    let mut mask = Vec::with_capacity(n_lon * n_lat);
    for v in rows.into_iter().flatten() {
        values.push(v.unwrap_or(0.0));
        mask.push(v.is_some());
    }
    SphericalMap::new(n_lon, n_lat, values, mask)
}

/// One point per observed cell at radius `1 - value` along the cell direction.
pub fn spherical_to_pointcloud(smap: &SphericalMap) -> PointCloud {
    let (n_lon, n_lat) = (smap.n_lon(), smap.n_lat());
    let mut points = Vec::with_capacity(smap.observed_count());
    for lat in 0..n_lat {
        for lon in 0..n_lon {
            if let Some(v) = smap.get(lon, lat) {
                points.push(cell_direction(lon, lat, n_lon, n_lat) * (1.0 - v as f64));
            }
        }
    }
    PointCloud::new(points).expect("directions and values are finite")
}

/// A spherical map widened in longitude by wrapped copies of its edge columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedMap {
    pub n_cols: usize,
    pub n_rows: usize,
    pub pad: usize,
    pub values: Vec<f32>,
    pub mask: Vec<bool>,
}

impl PaddedMap {
    /// Drop the padding columns again.
    pub fn crop_center(&self) -> Result<SphericalMap> {
        let n_lon = self.n_cols - 2 * self.pad;
        let mut values = Vec::with_capacity(n_lon * self.n_rows);
        let mut mask = Vec::with_capacity(n_lon * self.n_rows);
        for r in 0..self.n_rows {
            let row = r * self.n_cols + self.pad;
            values.extend_from_slice(&self.values[row..row + n_lon]);
            mask.extend_from_slice(&self.mask[row..row + n_lon]);
        }
        SphericalMap::new(n_lon, self.n_rows, values, mask)
    }
}

/// Prepend the last `width` columns and append the first `width` columns.
pub fn periodic_pad(smap: &SphericalMap, width: usize) -> Result<PaddedMap> {
    let n_lon = smap.n_lon();
    if width >= n_lon {
        return Err(Error::contract(format!(
            "padding width {width} must be below n_lon {n_lon}"
        )));
    }
    let n_cols = n_lon + 2 * width;
    let mut values = Vec::with_capacity(n_cols * smap.n_lat());
    let mut mask = Vec::with_capacity(n_cols * smap.n_lat());
    for lat in 0..smap.n_lat() {
        for c in 0..n_cols {
            let lon = (c + n_lon - width) % n_lon;
            let i = smap.index(lon, lat);
            values.push(smap.values()[i]);
            mask.push(smap.mask()[i]);
        }
    }
    Ok(PaddedMap {
        n_cols,
        n_rows: smap.n_lat(),
        pad: width,
        values,
        mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl InpaintConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::contract(format!(
                "inpaint tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::contract("inpaint max_iters must be positive"));
        }
        Ok(())
    }
}

/// Output of a completion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub map: SphericalMap,
    pub iterations: usize,
    pub residual: f64,
    /// False when the solver hit its iteration cap; `map` is still usable.
    pub converged: bool,
}

/// Fills the unobserved cells of a partial spherical map.
///
/// Implementations must return a fully observed map that keeps every
/// observed input cell bit-exactly; [`complete_checked`] enforces this.
pub trait SphericalCompletion: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, partial: &SphericalMap) -> Result<Completion>;
}

/// Run `completer` and verify its output contract.
pub fn complete_checked(
    completer: &dyn SphericalCompletion,
    partial: &SphericalMap,
) -> Result<Completion> {
    if partial.observed_count() == 0 {
        return Err(Error::degenerate("spherical map has no observed cells"));
    }
    let out = completer.complete(partial)?;
    let m = &out.map;
    if m.n_lon() != partial.n_lon() || m.n_lat() != partial.n_lat() {
        return Err(Error::contract(format!(
            "completion `{}` changed the grid size",
            completer.name()
        )));
    }
    if !m.is_fully_observed() {
        return Err(Error::contract(format!(
            "completion `{}` left cells unobserved",
            completer.name()
        )));
    }
    let altered = partial
        .mask()
        .iter()
        .enumerate()
        .any(|(i, &obs)| obs && partial.values()[i].to_bits() != m.values()[i].to_bits());
    if altered {
        return Err(Error::contract(format!(
            "completion `{}` altered an observed cell",
            completer.name()
        )));
    }
    Ok(out)
}

/// Discrete Laplace fill of the unobserved cells (Jacobi iteration).
///
/// Longitude wraps around; the top and bottom rows reflect their single
/// latitude neighbor instead of wrapping over the pole. Each missing region
/// starts from the mean of its own boundary, so every iterate, converged or
/// not, stays within that boundary's value range.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HarmonicInpainter {
    pub config: InpaintConfig,
}

impl HarmonicInpainter {
    pub fn new(config: InpaintConfig) -> Self {
        Self { config }
    }
}

fn neighbors(i: usize, n_lon: usize, n_lat: usize) -> [usize; 4] {
    let (lon, lat) = (i % n_lon, i / n_lon);
    let west = lat * n_lon + (lon + n_lon - 1) % n_lon;
    let east = lat * n_lon + (lon + 1) % n_lon;
    let south = if lat > 0 { lat - 1 } else { 1 };
    let north = if lat + 1 < n_lat { lat + 1 } else { n_lat - 2 };
    [west, east, south * n_lon + lon, north * n_lon + lon]
}

impl SphericalCompletion for HarmonicInpainter {
    fn name(&self) -> &str {
        "harmonic"
    }

    fn complete(&self, partial: &SphericalMap) -> Result<Completion> {
        self.config.validate()?;
        let (n_lon, n_lat) = (partial.n_lon(), partial.n_lat());
        if n_lat < 2 {
            return Err(Error::contract("inpainting needs at least two latitude rows"));
        }
        if partial.observed_count() == 0 {
            return Err(Error::degenerate("spherical map has no observed cells"));
        }
        if partial.is_fully_observed() {
            return Ok(Completion {
                map: partial.clone(),
                iterations: 0,
                residual: 0.0,
                converged: true,
            });
        }
        let n = n_lon * n_lat;
        let mask = partial.mask();
        let mut u: Vec<f64> = partial.values().iter().map(|&v| v as f64).collect();

        let missing: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
        let nbrs: Vec<[usize; 4]> = missing.iter().map(|&i| neighbors(i, n_lon, n_lat)).collect();

        // per-component initialization with the mean of the component's boundary
        let mut component = vec![usize::MAX; n];
        let mut queue = Vec::new();
        let mut n_components = 0;
        for &seed in &missing {
            if component[seed] != usize::MAX {
                continue;
            }
            let id = n_components;
            n_components += 1;
            component[seed] = id;
            queue.clear();
            queue.push(seed);
            let mut members = Vec::new();
            let mut boundary_sum = 0.0;
            let mut boundary_count = 0usize;
            let mut seen_boundary = std::collections::HashSet::new();
            while let Some(c) = queue.pop() {
                members.push(c);
                for nb in neighbors(c, n_lon, n_lat) {
                    if mask[nb] {
                        if seen_boundary.insert(nb) {
                            boundary_sum += u[nb];
                            boundary_count += 1;
                        }
                    } else if component[nb] == usize::MAX {
                        component[nb] = id;
                        queue.push(nb);
                    }
                }
            }
            let init = boundary_sum / boundary_count as f64;
            for c in members {
                u[c] = init;
            }
        }

        let mut next = u.clone();
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < self.config.max_iters {
            iterations += 1;
            residual = 0.0;
            for (&c, nb) in missing.iter().zip(&nbrs) {
                let v = (u[nb[0]] + u[nb[1]] + u[nb[2]] + u[nb[3]]) * 0.25;
                residual = f64::max(residual, (v - u[c]).abs());
                next[c] = v;
            }
            std::mem::swap(&mut u, &mut next);
            if residual < self.config.tolerance {
                break;
            }
        }
        let converged = residual < self.config.tolerance;
        if !converged {
            log::warn!(
                "harmonic inpainting stopped at the {iterations}-iteration cap with residual {residual:e}"
            );
        }
        let values: Vec<f32> = (0..n)
            .map(|i| {
                if mask[i] {
                    partial.values()[i]
                } else {
                    u[i].clamp(0.0, 1.0) as f32
                }
            })
            .collect();
        Ok(Completion {
            map: SphericalMap::new(n_lon, n_lat, values, vec![true; n])?,
            iterations,
            residual,
            converged,
        })
    }
}

/// Harmonic fill with the given configuration.
pub fn inpaint_spherical(smap: &SphericalMap, cfg: &InpaintConfig) -> Result<Completion> {
    complete_checked(&HarmonicInpainter::new(*cfg), smap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from_cols(cols: &[f32], n_lat: usize) -> SphericalMap {
        let n_lon = cols.len();
        let values: Vec<f32> = (0..n_lat).flat_map(|_| cols.iter().copied()).collect();
        SphericalMap::new(n_lon, n_lat, values, vec![true; n_lon * n_lat]).unwrap()
    }

    #[test]
    fn pad_wraps_columns() {
        let m = map_from_cols(&[0.0, 0.1, 0.2, 0.3], 2);
        let p = periodic_pad(&m, 1).unwrap();
        assert_eq!(p.n_cols, 6);
        assert_eq!(&p.values[..6], &[0.3, 0.0, 0.1, 0.2, 0.3, 0.0]);
        assert_eq!(p.crop_center().unwrap(), m);
        let p0 = periodic_pad(&m, 0).unwrap();
        assert_eq!(p0.values, m.values());
        assert!(periodic_pad(&m, 4).is_err());
    }

    #[test]
    fn fully_observed_is_unchanged_and_empty_is_degenerate() {
        let m = map_from_cols(&[0.1, 0.2, 0.3, 0.4], 4);
        let c = inpaint_spherical(&m, &InpaintConfig::default()).unwrap();
        assert_eq!(c.map, m);
        assert_eq!(c.iterations, 0);
        let empty = SphericalMap::new(4, 4, vec![0.0; 16], vec![false; 16]).unwrap();
        assert!(matches!(
            inpaint_spherical(&empty, &InpaintConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_partial_result() {
        let mut mask = vec![true; 64];
        for m in mask.iter_mut().skip(10).take(30) {
            *m = false;
        }
        let values: Vec<f32> = (0..64).map(|i| (i % 8) as f32 / 8.0).collect();
        let m = SphericalMap::new(8, 8, values, mask).unwrap();
        let c = inpaint_spherical(&m, &InpaintConfig { tolerance: 1e-15, max_iters: 3 }).unwrap();
        assert!(!c.converged);
        assert_eq!(c.iterations, 3);
        assert!(c.map.is_fully_observed());
    }

    struct Broken;
    impl SphericalCompletion for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn complete(&self, partial: &SphericalMap) -> Result<Completion> {
            let n = partial.n_lon() * partial.n_lat();
            Ok(Completion {
                map: SphericalMap::new(partial.n_lon(), partial.n_lat(), vec![0.5; n], vec![true; n])?,
                iterations: 0,
                residual: 0.0,
                converged: true,
            })
        }
    }

    #[test]
    fn checked_completion_rejects_contract_breaches() {
        let mut mask = vec![true; 16];
        mask[3] = false;
        let m = SphericalMap::new(4, 4, vec![0.25; 16], mask).unwrap();
        assert!(matches!(complete_checked(&Broken, &m), Err(Error::Contract(_))));
    }
}
