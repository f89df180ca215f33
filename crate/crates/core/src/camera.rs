//! Pinhole and orthographic cameras: depth unprojection and depth rendering.
//!
//! Camera frame: `+x` right, `+y` down, `+z` along the optical axis. Pixel
//! `(u, v)` has its center at `(u + 0.5, v + 0.5)`. Depth is z-depth, the
//! distance along the optical axis, not the ray length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bvh, Ray};
use crate::types::{DepthMap, Mat3, PointCloud, Pose, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum Projection {
    /// Focal length in pixels.
    Perspective { focal: f64 },
    /// World units spanned by one pixel.
    Orthographic { pixel_size: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub projection: Projection,
    pub width: usize,
    pub height: usize,
    /// Principal point in pixels.
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-world transform.
    pub pose: Pose,
}

impl Camera {
    pub fn new(
        projection: Projection,
        width: usize,
        height: usize,
        cx: f64,
        cy: f64,
        pose: Pose,
    ) -> Result<Self> {
        let cam = Self {
            projection,
            width,
            height,
            cx,
            cy,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Re-check invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::contract("camera image must be non-empty"));
        }
        match self.projection {
            Projection::Perspective { focal } if !(focal.is_finite() && focal > 0.0) => {
                return Err(Error::contract(format!("focal length {focal} must be > 0")));
            }
            Projection::Orthographic { pixel_size } if !(pixel_size.is_finite() && pixel_size > 0.0) => {
                return Err(Error::contract(format!("pixel size {pixel_size} must be > 0")));
            }
            _ => {}
        }
        let (w, h) = (self.width as f64, self.height as f64);
        if !(-w..=2.0 * w).contains(&self.cx) || !(-h..=2.0 * h).contains(&self.cy) {
            return Err(Error::contract(format!(
                "principal point ({}, {}) too far outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        // round-trips the rotation invariants
        Pose::new(*self.pose.rotation(), *self.pose.translation())?;
        Ok(())
    }

    /// Perspective camera with the given vertical field of view, principal
    /// point at the image center.
    pub fn perspective_fov(width: usize, height: usize, fov_y_deg: f64, pose: Pose) -> Result<Self> {
        if !(fov_y_deg > 0.0 && fov_y_deg < 180.0) {
            return Err(Error::contract(format!("field of view {fov_y_deg} out of (0, 180)")));
        }
        let focal = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Self::new(
            Projection::Perspective { focal },
            width,
            height,
            0.5 * width as f64,
            0.5 * height as f64,
            pose,
        )
    }

    pub fn orthographic(width: usize, height: usize, pixel_size: f64, pose: Pose) -> Result<Self> {
        Self::new(
            Projection::Orthographic { pixel_size },
            width,
            height,
            0.5 * width as f64,
            0.5 * height as f64,
            pose,
        )
    }

    /// Camera-frame point for pixel `(u, v)` at z-depth `depth`.
    #[inline]
    pub fn pixel_to_camera(&self, u: usize, v: usize, depth: f64) -> Vec3 {
        let px = u as f64 + 0.5 - self.cx;
        let py = v as f64 + 0.5 - self.cy;
        match self.projection {
            Projection::Perspective { focal } => Vec3::new(px / focal, py / focal, 1.0) * depth,
            Projection::Orthographic { pixel_size } => {
                Vec3::new(px * pixel_size, py * pixel_size, depth)
            }
        }
    }

    /// World-space ray through the center of pixel `(u, v)`. The direction's
    /// optical-axis component is 1, so hit parameters are z-depths.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Ray {
        let px = u as f64 + 0.5 - self.cx;
        let py = v as f64 + 0.5 - self.cy;
        let (origin_cam, dir_cam) = match self.projection {
            Projection::Perspective { focal } => {
                (Vec3::zeros(), Vec3::new(px / focal, py / focal, 1.0))
            }
            Projection::Orthographic { pixel_size } => {
                (Vec3::new(px * pixel_size, py * pixel_size, 0.0), Vec3::z())
            }
        };
        Ray {
            origin: self.pose.apply(&origin_cam),
            dir: self.pose.apply_vector(&dir_cam),
        }
    }

    /// Continuous pixel coordinates and z-depth of a world point, or `None`
    /// when it is not in front of the camera.
    pub fn project(&self, world: &Vec3) -> Option<(f64, f64, f64)> {
        let q = self.pose.inverse().apply(world);
        if !(q.z > 0.0) {
            return None;
        }
        let (x, y) = match self.projection {
            Projection::Perspective { focal } => (focal * q.x / q.z, focal * q.y / q.z),
            Projection::Orthographic { pixel_size } => (q.x / pixel_size, q.y / pixel_size),
        };
        Some((x + self.cx, y + self.cy, q.z))
    }

    /// Camera at `eye` looking at `target`; `up` picks the roll.
    pub fn look_at_pose(eye: Vec3, target: Vec3, up: Vec3) -> Result<Pose> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::contract("eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-9)
            .ok_or_else(|| Error::contract("up vector is parallel to the view direction"))?;
        let down = forward.cross(&right);
        Pose::new(Mat3::from_columns(&[right, down, forward]), eye)
    }

    /// Camera orbiting the origin at `distance`, elevation and azimuth in
    /// degrees, world `+z` up.
    pub fn orbit_pose(distance: f64, elevation_deg: f64, azimuth_deg: f64) -> Result<Pose> {
        let (e, a) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
        let eye = Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin()) * distance;
        let up = if e.cos().abs() < 1e-6 {
            // looking straight down or up: roll from the azimuth instead
            Vec3::new(-a.cos(), -a.sin(), 0.0) * e.sin().signum()
        } else {
            Vec3::z()
        };
        Self::look_at_pose(eye, Vec3::zeros(), up)
    }
}

/// One point per foreground pixel, in world coordinates.
pub fn unproject_depth(depth: &DepthMap, cam: &Camera) -> Result<PointCloud> {
    if depth.width() != cam.width || depth.height() != cam.height {
        return Err(Error::contract(format!(
            "depth map is {}x{} but camera expects {}x{}",
            depth.width(),
            depth.height(),
            cam.width,
            cam.height
        )));
    }
    let w = depth.width();
    let mut points = Vec::with_capacity(depth.valid_count());
    for (i, (&d, &m)) in depth.values().iter().zip(depth.mask()).enumerate() {
        if m {
            let p = cam.pixel_to_camera(i % w, i / w, d as f64);
            points.push(cam.pose.apply(&p));
        }
    }
    PointCloud::new(points)
}

/// Z-depth of the nearest surface per pixel; pixels without a hit are masked out.
pub fn render_depth(mesh: &TriangleMesh, cam: &Camera) -> Result<DepthMap> {
    if mesh.is_empty() {
        return Err(Error::contract("cannot render an empty mesh"));
    }
    let bvh = Bvh::build(mesh);
    render_depth_with(&bvh, cam)
}

/// [`render_depth`] against a prebuilt hierarchy.
pub fn render_depth_with(bvh: &Bvh, cam: &Camera) -> Result<DepthMap> {
    let (w, h) = (cam.width, cam.height);
    let rows: Vec<Vec<Option<f32>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    bvh.closest_hit(&cam.pixel_ray(u, v), f64::INFINITY)
                        .map(|hit| hit.t as f32)
                        .filter(|d| *d > 0.0 && d.is_finite())
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for d in rows.into_iter().flatten() {
        values.push(d.unwrap_or(0.0));
        mask.push(d.is_some());
    }
    DepthMap::new(w, h, values, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_point_pixel_maps_to_optical_axis() {
        let cam = Camera::new(
            Projection::Perspective { focal: 100.0 },
            64,
            48,
            10.5,
            20.5,
            Pose::identity(),
        )
        .unwrap();
        let mut vals = vec![0.0; 64 * 48];
        let mut mask = vec![false; 64 * 48];
        vals[20 * 64 + 10] = 2.0;
        mask[20 * 64 + 10] = true;
        let d = DepthMap::new(64, 48, vals, mask).unwrap();
        let pc = unproject_depth(&d, &cam).unwrap();
        assert_eq!(pc.points(), &[Vec3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn empty_mask_and_dimension_mismatch() {
        let cam = Camera::perspective_fov(8, 8, 50.0, Pose::identity()).unwrap();
        let d = DepthMap::new(8, 8, vec![0.0; 64], vec![false; 64]).unwrap();
        assert!(unproject_depth(&d, &cam).unwrap().is_empty());
        let d = DepthMap::new(4, 8, vec![0.0; 32], vec![false; 32]).unwrap();
        assert!(matches!(unproject_depth(&d, &cam), Err(Error::Contract(_))));
    }

    #[test]
    fn camera_invariants() {
        assert!(Camera::new(Projection::Perspective { focal: 0.0 }, 8, 8, 4.0, 4.0, Pose::identity()).is_err());
        assert!(Camera::new(Projection::Perspective { focal: 1.0 }, 8, 8, 17.0, 4.0, Pose::identity()).is_err());
        assert!(Camera::new(Projection::Perspective { focal: 1.0 }, 8, 8, -8.0, 16.0, Pose::identity()).is_ok());
        assert!(Camera::look_at_pose(Vec3::z(), Vec3::zeros(), Vec3::z()).is_err());
    }

    #[test]
    fn orbit_pose_looks_at_origin() {
        for (e, a) in [(0.0, 0.0), (30.0, 45.0), (90.0, 10.0), (-90.0, 200.0), (-45.0, 300.0)] {
            let pose = Camera::orbit_pose(2.0, e, a).unwrap();
            let forward = pose.apply_vector(&Vec3::z());
            let eye = *pose.translation();
            assert!((eye.norm() - 2.0).abs() < 1e-12);
            assert!((forward + eye / 2.0).norm() < 1e-12);
        }
    }
}
