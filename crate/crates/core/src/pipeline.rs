//! Stage orchestration from observed depth to a fused voxel grid, artifact
//! dumping and resumption, and batch evaluation.
//!
//! Stages: unproject → normalize → mesh → to-spherical → inpaint →
//! spherical-to-voxels, alongside depth-to-voxels, then fuse. All geometry
//! after normalization lives in the reconstruction frame: world coordinates
//! rotated into the first camera's axes about the world origin, then scaled
//! by the frame's similarity.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{render_depth, unproject_depth, Camera};
use crate::config::{CameraSpec, Mode, Normalization, PipelineConfig, SurfaceSpec};
use crate::error::{Error, Result, Stage};
use crate::io;
use crate::metrics::{eval_sweep, EvalReport, ObjectResult, Sweep, SweepConfig};
use crate::primitives::{generate_primitive, Primitive};
use crate::spherical::{
    cell_direction, complete_checked, mesh_to_spherical, spherical_to_pointcloud, HarmonicInpainter, SphericalCompletion,
};
use crate::surface::{bounding_sphere, marching_cubes, normalize_shape, Similarity, NORMALIZED_RADIUS};
use crate::types::{DepthMap, Extent, PointCloud, Pose, SphericalMap, TriangleMesh, Vec3, VoxelGrid};
use crate::voxel::{pointcloud_to_voxels, FusionRefiner, VoxelRefiner};

pub const PRIMITIVE_TESSELLATION: usize = 64;

/// One observation: a depth map and the camera that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub depth: DepthMap,
    pub camera: Camera,
}

/// World to reconstruction frame: `p -> similarity(world_to_view(p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub world_to_view: Pose,
    pub similarity: Similarity,
}

impl Frame {
    /// Rotation-only frame of `cam`, centered on the world origin.
    pub fn for_camera(cam: &Camera) -> Self {
        let r = cam.pose.rotation().transpose();
        Self {
            world_to_view: Pose::new(r, Default::default()).expect("transpose of a rotation"),
            similarity: Similarity::identity(),
        }
    }

    pub fn apply_cloud(&self, pc: &PointCloud) -> Result<PointCloud> {
        PointCloud::new(
            pc.points()
                .iter()
                .map(|p| self.similarity.apply(&self.world_to_view.apply(p)))
                .collect(),
        )
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        self.similarity.apply_mesh(&mesh.transformed(&self.world_to_view))
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.world_to_view.inverse().apply(&self.similarity.inverse().apply(p))
    }
}

fn seen_empty(view: &View, u: f64, v: f64, z: f64, margin: f64) -> bool {
    let (w, h) = (view.depth.width() as f64, view.depth.height() as f64);
    if !(u >= 0.0 && v >= 0.0 && u < w && v < h) {
        return false;
    }
    let i = v as usize * view.depth.width() + u as usize;
    !view.depth.mask()[i] || (z as f32) < view.depth.values()[i] - margin as f32
}

/// Mask out the cells flagged in `filled` whose point lies in space a view
/// saw as empty: the point's pixel and its four neighbors all show
/// background or a surface deeper than the point by more than `margin`
/// (frame units). Returns the carved map and the number of cells removed.
pub fn carve_free_space(
    smap: &SphericalMap,
    filled: &[bool],
    views: &[View],
    frame: &Frame,
    margin: f64,
) -> Result<(SphericalMap, usize)> {
    if filled.len() != smap.values().len() {
        return Err(Error::contract("carve flags do not match the map size"));
    }
    let (n_lon, n_lat) = (smap.n_lon(), smap.n_lat());
    let margin_world = margin / frame.similarity.scale;
    let mut mask = smap.mask().to_vec();
    let mut carved = 0;
    for lat in 0..n_lat {
        for lon in 0..n_lon {
            let i = smap.index(lon, lat);
            if !(filled[i] && mask[i]) {
                continue;
            }
            let p = cell_direction(lon, lat, n_lon, n_lat) * (1.0 - smap.values()[i] as f64);
            let world = frame.to_world(&p);
            let empty = views.iter().any(|view| {
                let Some((u, v, z)) = view.camera.project(&world) else {
                    return false;
                };
                [(0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)]
                    .iter()
                    .all(|(du, dv)| seen_empty(view, u + du, v + dv, z, margin_world))
            });
            if empty {
                mask[i] = false;
                carved += 1;
            }
        }
    }
    Ok((SphericalMap::new(n_lon, n_lat, smap.values().to_vec(), mask)?, carved))
}

/// Counters from the stages that actually ran.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunStats {
    pub observed_points: Option<usize>,
    pub discarded_depth_points: Option<usize>,
    pub discarded_spherical_points: Option<usize>,
    pub inpaint_iterations: Option<usize>,
    pub inpaint_residual: Option<f64>,
    pub inpaint_converged: Option<bool>,
    pub carved_cells: Option<usize>,
}

/// Every intermediate product of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub mode: Mode,
    pub views: Vec<View>,
    pub frame: Frame,
    pub points: PointCloud,
    pub partial_mesh: Option<TriangleMesh>,
    pub partial_spherical: Option<SphericalMap>,
    pub completed_spherical: Option<SphericalMap>,
    pub spherical_voxels: Option<VoxelGrid>,
    pub depth_voxels: VoxelGrid,
    pub fused: VoxelGrid,
    pub stats: RunStats,
}

const FRAME_FILE: &str = "frame.json";
const POINTS_FILE: &str = "points.obj";
const PARTIAL_MESH_FILE: &str = "partial_mesh.obj";
const PARTIAL_SPH_FILE: &str = "partial_spherical.voxb";
const COMPLETED_SPH_FILE: &str = "completed_spherical.voxb";
const SPH_VOXELS_FILE: &str = "spherical_voxels.voxb";
const DEPTH_VOXELS_FILE: &str = "depth_voxels.voxb";
const FUSED_FILE: &str = "fused.voxb";
const STATS_FILE: &str = "stats.json";

impl PipelineOutput {
    /// Write every artifact into `dir`, creating it if needed.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, v) in self.views.iter().enumerate() {
            io::write_depth_voxb(dir.join(format!("view_{k}.depth.voxb")), &v.depth)?;
            io::write_json(dir.join(format!("view_{k}.camera.json")), &v.camera)?;
        }
        io::write_json(dir.join(FRAME_FILE), &self.frame)?;
        io::write_points_obj(dir.join(POINTS_FILE), &self.points)?;
        if let Some(m) = &self.partial_mesh {
            io::write_mesh_obj(dir.join(PARTIAL_MESH_FILE), m)?;
        }
        if let Some(s) = &self.partial_spherical {
            io::write_spherical_map(dir.join(PARTIAL_SPH_FILE), s)?;
        }
        if let Some(s) = &self.completed_spherical {
            io::write_spherical_map(dir.join(COMPLETED_SPH_FILE), s)?;
        }
        if let Some(g) = &self.spherical_voxels {
            io::write_voxel_grid(dir.join(SPH_VOXELS_FILE), g)?;
        }
        io::write_voxel_grid(dir.join(DEPTH_VOXELS_FILE), &self.depth_voxels)?;
        io::write_voxel_grid(dir.join(FUSED_FILE), &self.fused)?;
        io::write_json(dir.join(STATS_FILE), &self.stats)?;
        Ok(())
    }
}

/// Artifacts available before the next stage runs.
#[derive(Debug, Default)]
struct State {
    views: Vec<View>,
    frame: Option<Frame>,
    points: Option<PointCloud>,
    partial_mesh: Option<TriangleMesh>,
    partial_spherical: Option<SphericalMap>,
    completed_spherical: Option<SphericalMap>,
    spherical_voxels: Option<VoxelGrid>,
    depth_voxels: Option<VoxelGrid>,
    stats: RunStats,
}

/// Occupancy of the observed points meshed at `iso`: a closed shell around
/// the visible surface.
pub fn mesh_points(points: &PointCloud, spec: &SurfaceSpec) -> Result<TriangleMesh> {
    let v = pointcloud_to_voxels(points, spec.resolution, &Extent::default())?;
    marching_cubes(&v.grid, spec.iso)
}

pub struct Pipeline {
    cfg: PipelineConfig,
    completer: Box<dyn SphericalCompletion>,
    refiner: Box<dyn VoxelRefiner>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            completer: Box::new(HarmonicInpainter::new(cfg.inpaint)),
            refiner: Box::new(FusionRefiner { mode: cfg.fusion }),
        })
    }

    pub fn with_completer(mut self, completer: Box<dyn SphericalCompletion>) -> Self {
        self.completer = completer;
        self
    }

    pub fn with_refiner(mut self, refiner: Box<dyn VoxelRefiner>) -> Self {
        self.refiner = refiner;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Observed points of every view, in the frame of the first view.
    pub fn observe(&self, views: &[View]) -> Result<(Frame, PointCloud)> {
        let first = views
            .first()
            .ok_or_else(|| Error::contract("pipeline needs at least one view").in_stage(Stage::Unproject))?;
        let mut clouds = Vec::with_capacity(views.len());
        for v in views {
            clouds.push(unproject_depth(&v.depth, &v.camera).map_err(|e| e.in_stage(Stage::Unproject))?);
        }
        let world = PointCloud::concat(&clouds);
        if world.is_empty() {
            return Err(Error::degenerate("depth has no foreground pixels").in_stage(Stage::Unproject));
        }
        let mut frame = Frame::for_camera(&first.camera);
        let rotated = frame.apply_cloud(&world).map_err(|e| e.in_stage(Stage::Normalize))?;
        if self.cfg.normalization == Normalization::FitVisible {
            let (center, radius) = bounding_sphere(rotated.points()).expect("non-empty cloud");
            if !(radius > f64::MIN_POSITIVE) {
                return Err(Error::degenerate("observed points have zero extent").in_stage(Stage::Normalize));
            }
            let scale = NORMALIZED_RADIUS / radius;
            let t = -center * scale;
            frame.similarity = Similarity {
                scale,
                translation: [t.x, t.y, t.z],
            };
        }
        let points = frame.apply_cloud(&world).map_err(|e| e.in_stage(Stage::Normalize))?;
        Ok((frame, points))
    }

    /// Full run. `gt_world` is required in [`Mode::SphOracle`], where its
    /// spherical map replaces inpainting.
    pub fn run(&self, views: &[View], gt_world: Option<&TriangleMesh>) -> Result<PipelineOutput> {
        let (frame, points) = self.observe(views)?;
        let state = State {
            stats: RunStats {
                observed_points: Some(points.len()),
                ..Default::default()
            },
            views: views.to_vec(),
            frame: Some(frame),
            points: Some(points),
            ..Default::default()
        };
        self.finish(state, gt_world)
    }

    /// Reload the artifacts produced before `from` out of `dir` and run the
    /// remaining stages.
    pub fn resume(&self, dir: &Path, from: Stage, gt_world: Option<&TriangleMesh>) -> Result<PipelineOutput> {
        let order = [
            Stage::Mesh,
            Stage::ToSpherical,
            Stage::Inpaint,
            Stage::SphericalToVoxels,
            Stage::DepthToVoxels,
            Stage::Fuse,
        ];
        let pos = order.iter().position(|s| *s == from).ok_or_else(|| {
            Error::contract(format!("cannot resume at {from}; rerun from depth instead"))
        })?;
        let before = |s: Stage| order[..pos].contains(&s);
        let spherical = self.cfg.mode != Mode::Completion3d;
        let mut views = Vec::new();
        while dir.join(format!("view_{}.camera.json", views.len())).exists() {
            let k = views.len();
            let camera: Camera = io::read_json(dir.join(format!("view_{k}.camera.json")))?;
            camera.validate()?;
            views.push(View {
                depth: io::read_depth_voxb(dir.join(format!("view_{k}.depth.voxb")))?,
                camera,
            });
        }
        let mut state = State {
            views,
            frame: Some(io::read_json(dir.join(FRAME_FILE))?),
            points: Some(io::read_points_obj(dir.join(POINTS_FILE))?),
            ..Default::default()
        };
        if self.cfg.mode == Mode::Oracle && before(Stage::Mesh) {
            state.partial_mesh = Some(io::read_mesh_obj(dir.join(PARTIAL_MESH_FILE))?);
        }
        if self.cfg.mode == Mode::Oracle && before(Stage::ToSpherical) {
            state.partial_spherical = Some(io::read_spherical_map(dir.join(PARTIAL_SPH_FILE))?);
        }
        if spherical && before(Stage::Inpaint) {
            state.completed_spherical = Some(io::read_spherical_map(dir.join(COMPLETED_SPH_FILE))?);
        }
        if spherical && before(Stage::SphericalToVoxels) {
            state.spherical_voxels = Some(io::read_voxel_grid(dir.join(SPH_VOXELS_FILE))?);
        }
        if before(Stage::DepthToVoxels) {
            state.depth_voxels = Some(io::read_voxel_grid(dir.join(DEPTH_VOXELS_FILE))?);
        }
        self.finish(state, gt_world)
    }

    fn finish(&self, mut s: State, gt_world: Option<&TriangleMesh>) -> Result<PipelineOutput> {
        let cfg = &self.cfg;
        let frame = s.frame.expect("frame is always present");
        let points = s.points.take().expect("points are always present");
        let extent = Extent::default();

        if cfg.mode != Mode::Completion3d && s.completed_spherical.is_none() {
            let completed = match cfg.mode {
                Mode::SphOracle => {
                    let gt = gt_world.ok_or_else(|| {
                        Error::contract("sph_oracle mode needs the ground-truth mesh").in_stage(Stage::ToSpherical)
                    })?;
                    let gt_frame = frame.apply_mesh(gt).map_err(|e| e.in_stage(Stage::ToSpherical))?;
                    mesh_to_spherical(&gt_frame, cfg.spherical.n_lon, cfg.spherical.n_lat)
                        .map_err(|e| e.in_stage(Stage::ToSpherical))?
                }
                _ => {
                    if s.partial_spherical.is_none() {
                        if s.partial_mesh.is_none() {
                            s.partial_mesh =
                                Some(mesh_points(&points, &cfg.surface).map_err(|e| e.in_stage(Stage::Mesh))?);
                        }
                        let mesh = s.partial_mesh.as_ref().expect("just computed");
                        s.partial_spherical = Some(
                            mesh_to_spherical(mesh, cfg.spherical.n_lon, cfg.spherical.n_lat)
                                .map_err(|e| e.in_stage(Stage::ToSpherical))?,
                        );
                    }
                    let partial = s.partial_spherical.as_ref().expect("just computed");
                    let c = complete_checked(self.completer.as_ref(), partial)
                        .map_err(|e| e.in_stage(Stage::Inpaint))?;
                    if !c.converged {
                        log::debug!(
                            "{} stopped after {} iterations, residual {:e}",
                            self.completer.name(),
                            c.iterations,
                            c.residual
                        );
                    }
                    s.stats.inpaint_iterations = Some(c.iterations);
                    s.stats.inpaint_residual = Some(c.residual);
                    s.stats.inpaint_converged = Some(c.converged);
                    if cfg.carve.enabled {
                        let filled: Vec<bool> = partial.mask().iter().map(|m| !m).collect();
                        let (carved, n) = carve_free_space(&c.map, &filled, &s.views, &frame, cfg.carve.margin)
                            .map_err(|e| e.in_stage(Stage::Inpaint))?;
                        s.stats.carved_cells = Some(n);
                        carved
                    } else {
                        c.map
                    }
                }
            };
            s.completed_spherical = Some(completed);
        }

        if cfg.mode != Mode::Completion3d && s.spherical_voxels.is_none() {
            let sph = s.completed_spherical.as_ref().expect("computed above");
            let v = pointcloud_to_voxels(&spherical_to_pointcloud(sph), cfg.voxel_resolution, &extent)
                .map_err(|e| e.in_stage(Stage::SphericalToVoxels))?;
            s.stats.discarded_spherical_points = Some(v.discarded);
            s.spherical_voxels = Some(v.grid);
        }

        if s.depth_voxels.is_none() {
            let v = pointcloud_to_voxels(&points, cfg.voxel_resolution, &extent)
                .map_err(|e| e.in_stage(Stage::DepthToVoxels))?;
            if v.discarded > 0 {
                log::warn!("{} observed points fell outside the voxel extent", v.discarded);
            }
            s.stats.discarded_depth_points = Some(v.discarded);
            s.depth_voxels = Some(v.grid);
        }
        let depth_voxels = s.depth_voxels.expect("computed above");

        let fused = match &s.spherical_voxels {
            Some(sph) => self.refiner.refine(sph, &depth_voxels),
            None => self.refiner.refine(&depth_voxels, &depth_voxels),
        }
        .map_err(|e| e.in_stage(Stage::Fuse))?;

        Ok(PipelineOutput {
            mode: cfg.mode,
            views: s.views,
            frame,
            points,
            partial_mesh: s.partial_mesh,
            partial_spherical: s.partial_spherical,
            completed_spherical: s.completed_spherical,
            spherical_voxels: s.spherical_voxels,
            depth_voxels,
            fused,
            stats: s.stats,
        })
    }
}

/// Single-view run with the default stages.
pub fn run_pipeline(depth: &DepthMap, cam: &Camera, cfg: &PipelineConfig) -> Result<VoxelGrid> {
    let view = View {
        depth: depth.clone(),
        camera: *cam,
    };
    Ok(Pipeline::new(*cfg)?.run(&[view], None)?.fused)
}

/// Sweep the fused grid against the ground truth mapped into the output frame.
pub fn evaluate(out: &PipelineOutput, gt_world: &TriangleMesh, sweep: &SweepConfig) -> Result<Sweep> {
    let gt = out.frame.apply_mesh(gt_world).map_err(|e| e.in_stage(Stage::Evaluate))?;
    eval_sweep(&out.fused, &gt, sweep).map_err(|e| e.in_stage(Stage::Evaluate))
}

/// Render `mesh_world` from `camera`, reconstruct, and evaluate.
pub fn reconstruct_and_evaluate(
    pipeline: &Pipeline,
    mesh_world: &TriangleMesh,
    camera: &CameraSpec,
) -> Result<(PipelineOutput, Sweep)> {
    let cam = camera.camera()?;
    let depth = render_depth(mesh_world, &cam)?;
    let out = pipeline.run(&[View { depth, camera: cam }], Some(mesh_world))?;
    let sweep = evaluate(&out, mesh_world, &pipeline.config().sweep)?;
    Ok((out, sweep))
}

/// Shape source of a batch entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSource {
    Mesh(PathBuf),
    Primitive(Primitive),
}

/// One line of a batch manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub shape: ShapeSource,
    pub class: String,
    #[serde(default)]
    pub id: Option<String>,
    /// Falls back to the config camera.
    #[serde(default)]
    pub camera: Option<CameraSpec>,
}

impl ManifestEntry {
    pub fn id(&self, line: usize) -> String {
        self.id.clone().unwrap_or_else(|| match &self.shape {
            ShapeSource::Mesh(p) => p.display().to_string(),
            ShapeSource::Primitive(p) => format!("{}-{line}", p.name()),
        })
    }

    /// The shape normalized to radius 0.5 about the origin.
    pub fn load_shape(&self) -> Result<TriangleMesh> {
        let mesh = match &self.shape {
            ShapeSource::Mesh(p) => io::read_mesh_obj(p)?,
            ShapeSource::Primitive(p) => generate_primitive(p, PRIMITIVE_TESSELLATION)?,
        };
        Ok(normalize_shape(&mesh)?.0)
    }
}

/// Parse a JSON-lines manifest; relative mesh paths resolve against its directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::format(format!("{}:{}: {err}", path.display(), i + 1)))?;
        if let ShapeSource::Mesh(p) = &mut e.shape {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Evaluate every entry and aggregate per class. Objects run in parallel;
/// the report does not depend on scheduling.
pub fn run_batch(entries: &[ManifestEntry], cfg: &PipelineConfig) -> Result<EvalReport> {
    let pipeline = Pipeline::new(*cfg)?;
    let results: Vec<Result<ObjectResult>> = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let id = e.id(i);
            let mesh = e.load_shape()?;
            let camera = e.camera.unwrap_or(cfg.camera);
            let (_, sweep) = reconstruct_and_evaluate(&pipeline, &mesh, &camera).inspect_err(|err| {
                log::error!("object {id}: {err}");
            })?;
            Ok(ObjectResult::from_sweep(&id, &e.class, cfg.mode.label(), &sweep))
        })
        .collect();
    let objects = results.into_iter().collect::<Result<Vec<_>>>()?;
    EvalReport::new(objects, cfg.sweep.samples, cfg.sweep.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_of_identity_camera_is_identity() {
        let cam = Camera::perspective_fov(8, 8, 50.0, Pose::identity()).unwrap();
        let f = Frame::for_camera(&cam);
        assert_eq!(f.world_to_view, Pose::identity());
    }

    #[test]
    fn no_views_or_empty_depth() {
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        assert!(matches!(p.run(&[], None), Err(Error::Stage { stage: Stage::Unproject, .. })));
        let cam = Camera::perspective_fov(4, 4, 50.0, Pose::identity()).unwrap();
        let depth = DepthMap::from_values(4, 4, vec![0.0; 16]).unwrap();
        let err = p.run(&[View { depth, camera: cam }], None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn manifest_lines() {
        let line = r#"{"shape": {"kind": "sphere", "radius": 0.5}, "class": "ball"}"#;
        let e: ManifestEntry = serde_json::from_str(line).unwrap();
        assert_eq!(e.id(3), "sphere-3");
        let line = r#"{"shape": "a/b.obj", "class": "x", "id": "b"}"#;
        let e: ManifestEntry = serde_json::from_str(line).unwrap();
        assert_eq!(e.shape, ShapeSource::Mesh("a/b.obj".into()));
        assert!(serde_json::from_str::<ManifestEntry>(r#"{"shape": "a", "class": "x", "typo": 1}"#).is_err());
    }
}
