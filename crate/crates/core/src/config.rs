//! Pipeline configuration. JSON form; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::metrics::SweepConfig;
use crate::spherical::{InpaintConfig, MIN_SPHERICAL_RES};
use crate::voxel::FusionMode;

pub const CONFIG_VERSION: u32 = 1;

/// Which stages run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Observed depth, inpainted spherical map.
    #[default]
    Oracle,
    /// Observed depth, ground-truth spherical map in place of inpainting.
    SphOracle,
    /// Depth voxels only, fused with themselves.
    #[serde(rename = "completion_3d")]
    Completion3d,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::SphOracle => "sph_oracle",
            Mode::Completion3d => "completion_3d",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Mode::Oracle),
            "sph_oracle" => Ok(Mode::SphOracle),
            "completion_3d" => Ok(Mode::Completion3d),
            other => Err(Error::contract(format!("unknown mode {other:?}"))),
        }
    }
}

/// How observed points are brought into the reconstruction frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Objects are already centered at the world origin with radius 0.5;
    /// only the camera rotation is removed.
    #[default]
    KnownFrame,
    /// Additionally center and scale the visible points to radius 0.5.
    FitVisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionSpec {
    Perspective { fov_y_deg: f64 },
    Orthographic { pixel_size: f64 },
}

/// A camera orbiting the origin, world `+z` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub projection: ProjectionSpec,
    pub distance: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            projection: ProjectionSpec::Perspective { fov_y_deg: 50.0 },
            distance: 1.5,
            elevation_deg: 30.0,
            azimuth_deg: 45.0,
        }
    }
}

impl CameraSpec {
    pub fn with_view(&self, elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self {
            elevation_deg,
            azimuth_deg,
            ..*self
        }
    }

    pub fn camera(&self) -> Result<Camera> {
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(Error::contract(format!(
                "camera distance {} must be positive",
                self.distance
            )));
        }
        let pose = Camera::orbit_pose(self.distance, self.elevation_deg, self.azimuth_deg)?;
        match self.projection {
            ProjectionSpec::Perspective { fov_y_deg } => {
                Camera::perspective_fov(self.width, self.height, fov_y_deg, pose)
            }
            ProjectionSpec::Orthographic { pixel_size } => {
                Camera::orthographic(self.width, self.height, pixel_size, pose)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphericalSpec {
    pub n_lon: usize,
    pub n_lat: usize,
}

impl Default for SphericalSpec {
    fn default() -> Self {
        Self { n_lon: 160, n_lat: 160 }
    }
}

/// Meshing of the observed points before spherical projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSpec {
    pub resolution: usize,
    /// Below the smallest occupied value, so every occupied voxel is enclosed.
    pub iso: f64,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self {
            resolution: 128,
            iso: 0.1,
        }
    }
}

/// Removal of completed spherical points that the depth views show as
/// empty space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarveSpec {
    pub enabled: bool,
    /// Depth margin in reconstruction-frame units.
    pub margin: f64,
}

impl Default for CarveSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            margin: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub mode: Mode,
    pub normalization: Normalization,
    pub camera: CameraSpec,
    pub spherical: SphericalSpec,
    pub inpaint: InpaintConfig,
    pub carve: CarveSpec,
    pub surface: SurfaceSpec,
    pub voxel_resolution: usize,
    pub fusion: FusionMode,
    pub sweep: SweepConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            mode: Mode::default(),
            normalization: Normalization::default(),
            camera: CameraSpec::default(),
            spherical: SphericalSpec::default(),
            inpaint: InpaintConfig::default(),
            carve: CarveSpec::default(),
            surface: SurfaceSpec::default(),
            voxel_resolution: 128,
            fusion: FusionMode::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::contract(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let s = self.spherical;
        if s.n_lon < MIN_SPHERICAL_RES || s.n_lat < MIN_SPHERICAL_RES {
            return Err(Error::contract(format!(
                "spherical resolution {}x{} below {MIN_SPHERICAL_RES}",
                s.n_lon, s.n_lat
            )));
        }
        if self.voxel_resolution < 2 || self.surface.resolution < 2 {
            return Err(Error::contract("voxel resolutions must be >= 2"));
        }
        if !(self.surface.iso > 0.0 && self.surface.iso < 1.0) {
            return Err(Error::contract(format!(
                "surface iso {} must lie in (0, 1)",
                self.surface.iso
            )));
        }
        if !(self.carve.margin.is_finite() && self.carve.margin >= 0.0) {
            return Err(Error::contract(format!(
                "carve margin {} must be non-negative",
                self.carve.margin
            )));
        }
        if self.sweep.samples == 0 {
            return Err(Error::contract("sweep sample count must be positive"));
        }
        self.inpaint.validate()?;
        self.camera.camera()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
