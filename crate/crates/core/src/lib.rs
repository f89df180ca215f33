//! Shape reconstruction from depth through spherical maps and voxel grids,
//! with Chamfer-based evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod primitives;
pub mod rng;
pub mod spherical;
pub mod surface;
pub mod types;
pub mod viewpoint;
pub mod voxel;

pub use config::PipelineConfig;
pub use error::{Error, ErrorKind, Result, Stage};
pub use types::{DepthMap, Extent, Mat3, PointCloud, Pose, SphericalMap, TriangleMesh, Vec3, VoxelGrid};
