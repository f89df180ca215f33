use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sphrecon::camera::{render_depth, unproject_depth, Camera};
use sphrecon::config::{CameraSpec, Mode};
use sphrecon::io;
use sphrecon::metrics::{chamfer, class_dissimilarity, eval_sweep, EvalReport, ObjectResult};
use sphrecon::pipeline::{evaluate, read_manifest, run_batch, ManifestEntry, Pipeline, ShapeSource, View};
use sphrecon::primitives::{generate_primitive, Primitive};
use sphrecon::spherical::{complete_checked, mesh_to_spherical, HarmonicInpainter};
use sphrecon::surface::{marching_cubes, normalize_shape, sample_surface};
use sphrecon::viewpoint::viewpoint_grid;
use sphrecon::voxel::{fuse_voxels, pointcloud_to_voxels, FusionMode};
use sphrecon::{Error, PipelineConfig, PointCloud, Result, TriangleMesh};

#[derive(Parser)]
#[command(name = "sphrecon", version, about = "Depth to spherical map to voxels, with Chamfer evaluation")]
struct Cli {
    /// Pipeline configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampling seed of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write every intermediate artifact into this directory
    #[arg(long, global = true)]
    dump_intermediates: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a z-depth map of a mesh
    RenderDepth {
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
    },
    /// Back-project a depth map into a point cloud
    Unproject {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        camera: PathBuf,
    },
    /// Ray-cast a normalized mesh into a spherical map
    ToSpherical {
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Fill the unobserved cells of a spherical map
    Inpaint {
        #[arg(long)]
        input: PathBuf,
    },
    /// Voxelize a point cloud (OBJ vertices)
    ToVoxels {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Fuse two voxel grids on the same lattice
    Fuse {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        mode: Option<FusionMode>,
    },
    /// Extract an isosurface mesh from a voxel grid
    Isosurface {
        grid: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iso: f64,
    },
    /// Chamfer distance between two OBJ point sets
    Chamfer { a: PathBuf, b: PathBuf },
    /// Threshold sweep of a voxel grid against a ground-truth mesh
    Eval {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "object")]
        id: String,
        #[arg(long, default_value = "unknown")]
        class: String,
        #[arg(long, default_value = "external")]
        model: String,
    },
    /// Mean over test meshes of the CD to the closest training mesh
    Dissimilarity {
        #[arg(long, num_args = 1.., required = true)]
        test: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        train: Vec<PathBuf>,
    },
    /// Median best CD over an elevation x azimuth grid of views
    ViewpointGrid {
        #[command(flatten)]
        shapes: ShapeArgs,
        #[arg(long, default_value_t = 5)]
        n_elev: usize,
        #[arg(long, default_value_t = 8)]
        n_azim: usize,
        /// Heatmap pixels per view
        #[arg(long, default_value_t = 24)]
        cell_px: u32,
    },
    /// Generate a primitive mesh (OBJ)
    GenPrimitive {
        /// Primitive as JSON, e.g. '{"kind":"torus","major":0.3,"minor":0.1}'
        spec: String,
        #[arg(long, default_value_t = 64)]
        tessellation: usize,
        /// Rescale to bounding radius 0.5 about the origin
        #[arg(long)]
        normalize: bool,
    },
    /// Full pipeline: from a mesh, primitive, manifest, or depth map
    Run {
        #[command(flatten)]
        shapes: ShapeArgs,
        /// JSON-lines batch manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Observed depth instead of rendering (needs --camera)
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Ground truth for evaluating a depth-driven run
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
    /// Print the effective configuration
    PrintConfig,
}

#[derive(Args)]
struct ViewArgs {
    /// Camera JSON; defaults to the configured orbit camera
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    elevation: Option<f64>,
    #[arg(long)]
    azimuth: Option<f64>,
}

#[derive(Args)]
struct ShapeArgs {
    /// Mesh files (OBJ)
    #[arg(long, num_args = 1..)]
    mesh: Vec<PathBuf>,
    /// Primitives as JSON
    #[arg(long, num_args = 1..)]
    primitive: Vec<String>,
}

impl ShapeArgs {
    fn entries(&self, class: Option<&str>) -> Result<Vec<ManifestEntry>> {
        let mut out = Vec::new();
        for m in &self.mesh {
            out.push(ManifestEntry {
                shape: ShapeSource::Mesh(m.clone()),
                class: class.unwrap_or("mesh").to_string(),
                id: None,
                camera: None,
            });
        }
        for p in &self.primitive {
            let prim = parse_primitive(p)?;
            out.push(ManifestEntry {
                shape: ShapeSource::Primitive(prim),
                class: class.unwrap_or(prim.name()).to_string(),
                id: None,
                camera: None,
            });
        }
        Ok(out)
    }
}

fn parse_primitive(text: &str) -> Result<Primitive> {
    serde_json::from_str(text).map_err(|e| Error::contract(format!("primitive spec {text:?}: {e}")))
}

fn output(cli: &Cli) -> Result<&Path> {
    cli.output
        .as_deref()
        .ok_or_else(|| Error::contract("this command needs --output"))
}

fn emit<T: Serialize>(cli: &Cli, value: &T) -> Result<()> {
    match &cli.output {
        Some(p) => io::write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn emit_report(cli: &Cli, report: &EvalReport) -> Result<()> {
    emit(cli, report)?;
    if let Some(p) = &cli.output {
        std::fs::write(p.with_extension("csv"), report.to_csv())?;
    }
    Ok(())
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    io::read_points_obj(path)
}

fn read_camera(path: &Path) -> Result<Camera> {
    let cam: Camera = io::read_json(path)?;
    cam.validate()?;
    Ok(cam)
}

fn camera_path(depth_out: &Path) -> PathBuf {
    depth_out.with_extension("camera.json")
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sweep.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn view_camera(cfg: &PipelineConfig, view: &ViewArgs) -> Result<Camera> {
    if let Some(p) = &view.camera {
        return read_camera(p);
    }
    let spec: CameraSpec = cfg.camera.with_view(
        view.elevation.unwrap_or(cfg.camera.elevation_deg),
        view.azimuth.unwrap_or(cfg.camera.azimuth_deg),
    );
    spec.camera()
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::PrintConfig => {
            let text = cfg.to_json();
            match &cli.output {
                Some(p) => std::fs::write(p, text + "\n")?,
                None => println!("{text}"),
            }
        }
        Command::GenPrimitive {
            spec,
            tessellation,
            normalize,
        } => {
            let mut mesh = generate_primitive(&parse_primitive(spec)?, *tessellation)?;
            if *normalize {
                mesh = normalize_shape(&mesh)?.0;
            }
            io::write_mesh_obj(output(cli)?, &mesh)?;
        }
        Command::RenderDepth { mesh, view } => {
            let mesh = io::read_mesh_obj(mesh)?;
            let cam = view_camera(&cfg, view)?;
            let depth = render_depth(&mesh, &cam)?;
            let out = output(cli)?;
            io::write_depth(out, &depth)?;
            io::write_json(camera_path(out), &cam)?;
        }
        Command::Unproject { depth, camera } => {
            let cam = read_camera(camera)?;
            let depth = io::read_depth(depth, None)?;
            io::write_points_obj(output(cli)?, &unproject_depth(&depth, &cam)?)?;
        }
        Command::ToSpherical { mesh } => {
            let mesh = io::read_mesh_obj(mesh)?;
            let smap = mesh_to_spherical(&mesh, cfg.spherical.n_lon, cfg.spherical.n_lat)?;
            io::write_spherical_map(output(cli)?, &smap)?;
        }
        Command::Inpaint { input } => {
            let partial = io::read_spherical_map(input)?;
            let c = complete_checked(&HarmonicInpainter::new(cfg.inpaint), &partial)?;
            log::info!(
                "inpainting: {} iterations, residual {:e}, converged {}",
                c.iterations,
                c.residual,
                c.converged
            );
            io::write_spherical_map(output(cli)?, &c.map)?;
        }
        Command::ToVoxels { points, resolution } => {
            let pc = read_cloud(points)?;
            let v = pointcloud_to_voxels(&pc, resolution.unwrap_or(cfg.voxel_resolution), &Default::default())?;
            if v.discarded > 0 {
                log::warn!("{} points outside the voxel extent were discarded", v.discarded);
            }
            io::write_voxel_grid(output(cli)?, &v.grid)?;
        }
        Command::Fuse { a, b, mode } => {
            let fused = fuse_voxels(
                &io::read_voxel_grid(a)?,
                &io::read_voxel_grid(b)?,
                mode.unwrap_or(cfg.fusion),
            )?;
            io::write_voxel_grid(output(cli)?, &fused)?;
        }
        Command::Isosurface { grid, iso } => {
            let mesh = marching_cubes(&io::read_voxel_grid(grid)?, *iso)?;
            io::write_mesh_obj(output(cli)?, &mesh)?;
        }
        Command::Chamfer { a, b } => {
            let cd = chamfer(&read_cloud(a)?, &read_cloud(b)?)?;
            emit(cli, &serde_json::json!({ "chamfer": cd }))?;
        }
        Command::Eval {
            grid,
            gt,
            id,
            class,
            model,
        } => {
            let sweep = eval_sweep(&io::read_voxel_grid(grid)?, &io::read_mesh_obj(gt)?, &cfg.sweep)?;
            let report = EvalReport::new(
                vec![ObjectResult::from_sweep(id, class, model, &sweep)],
                cfg.sweep.samples,
                cfg.sweep.seed,
            )?;
            emit_report(cli, &report)?;
        }
        Command::Dissimilarity { test, train } => {
            let sample = |paths: &[PathBuf]| -> Result<Vec<PointCloud>> {
                paths
                    .iter()
                    .map(|p| sample_surface(&io::read_mesh_obj(p)?, cfg.sweep.samples, cfg.sweep.seed))
                    .collect()
            };
            let d = class_dissimilarity(&sample(test)?, &sample(train)?)?;
            emit(cli, &serde_json::json!({ "dissimilarity": d }))?;
        }
        Command::ViewpointGrid {
            shapes,
            n_elev,
            n_azim,
            cell_px,
        } => {
            let meshes = shapes
                .entries(None)?
                .iter()
                .map(ManifestEntry::load_shape)
                .collect::<Result<Vec<TriangleMesh>>>()?;
            let grid = viewpoint_grid(&meshes, &cfg, *n_elev, *n_azim)?;
            let out = output(cli)?;
            grid.write_voxb(out)?;
            grid.write_png(&out.with_extension("png"), *cell_px)?;
            io::write_json(
                out.with_extension("json"),
                &serde_json::json!({
                    "elevations_deg": grid.elevations,
                    "azimuths_deg": grid.azimuths,
                    "median_best_cd": grid.cds.iter().map(|c| c.is_finite().then_some(*c)).collect::<Vec<_>>(),
                }),
            )?;
        }
        Command::Run {
            shapes,
            manifest,
            depth,
            camera,
            gt,
            class,
        } => run(cli, &cfg, shapes, manifest.as_deref(), depth.as_deref(), camera.as_deref(), gt.as_deref(), class.as_deref())?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    cli: &Cli,
    cfg: &PipelineConfig,
    shapes: &ShapeArgs,
    manifest: Option<&Path>,
    depth: Option<&Path>,
    camera: Option<&Path>,
    gt: Option<&Path>,
    class: Option<&str>,
) -> Result<()> {
    if let Some(depth) = depth {
        let camera = camera.ok_or_else(|| Error::contract("--depth needs --camera"))?;
        let view = View {
            depth: io::read_depth(depth, None)?,
            camera: read_camera(camera)?,
        };
        let gt_mesh = gt.map(io::read_mesh_obj).transpose()?;
        if cfg.mode == Mode::SphOracle && gt_mesh.is_none() {
            return Err(Error::contract("sph_oracle mode needs --gt"));
        }
        let out = Pipeline::new(*cfg)?.run(&[view], gt_mesh.as_ref())?;
        if let Some(dir) = &cli.dump_intermediates {
            out.dump(dir)?;
        }
        return match gt_mesh {
            Some(gt_mesh) => {
                let sweep = evaluate(&out, &gt_mesh, &cfg.sweep)?;
                let id = depth.display().to_string();
                let report = EvalReport::new(
                    vec![ObjectResult::from_sweep(&id, class.unwrap_or("object"), cfg.mode.label(), &sweep)],
                    cfg.sweep.samples,
                    cfg.sweep.seed,
                )?;
                emit_report(cli, &report)
            }
            None => io::write_voxel_grid(output(cli)?, &out.fused),
        };
    }

    let mut entries = shapes.entries(class)?;
    if let Some(m) = manifest {
        entries.extend(read_manifest(m)?);
    }
    if entries.is_empty() {
        return Err(Error::contract("run needs --mesh, --primitive, --manifest, or --depth"));
    }
    if let Some(dir) = &cli.dump_intermediates {
        let pipeline = Pipeline::new(*cfg)?;
        for (i, e) in entries.iter().enumerate() {
            let mesh = e.load_shape()?;
            let cam = e.camera.unwrap_or(cfg.camera).camera()?;
            let view = View {
                depth: render_depth(&mesh, &cam)?,
                camera: cam,
            };
            let out = pipeline.run(&[view], Some(&mesh))?;
            out.dump(&dir.join(sanitize(&e.id(i))))?;
        }
    }
    emit_report(cli, &run_batch(&entries, cfg)?)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
