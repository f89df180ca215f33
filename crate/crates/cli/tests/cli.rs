use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sphrecon::io;
use sphrecon::metrics::EvalReport;
use sphrecon::{Extent, PipelineConfig, VoxelGrid};

fn sphrecon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphrecon"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sphrecon(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{
  "voxel_resolution": 24,
  "spherical": {"n_lon": 32, "n_lat": 32},
  "surface": {"resolution": 48},
  "camera": {"width": 64, "height": 64},
  "sweep": {"samples": 512}
}"#,
    )
    .unwrap();
    path
}

#[test]
fn print_config_emits_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["print-config"]);
    let cfg = PipelineConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, PipelineConfig::default());

    let out = ok(dir.path(), &["--seed", "17", "print-config"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("\"seed\": 17"));
}

#[test]
fn bad_configs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("typo.json"), r#"{"voxel_resolutoin": 3}"#).unwrap();
    std::fs::write(p.join("v2.json"), r#"{"version": 2}"#).unwrap();
    assert_eq!(code(&sphrecon(p, &["--config", "typo.json", "print-config"])), 4);
    assert_eq!(code(&sphrecon(p, &["--config", "v2.json", "print-config"])), 2);
    assert_eq!(code(&sphrecon(p, &["--config", "missing.json", "print-config"])), 4);
    assert_eq!(code(&sphrecon(p, &["--threads", "0", "print-config"])), 2);
    assert_eq!(code(&sphrecon(p, &["no-such-command"])), 2);
}

#[test]
fn stage_commands_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_config(p);
    let c = ["--config", "small.json"];
    let run = |args: &[&str]| ok(p, &[&c[..], args].concat());

    run(&["gen-primitive", r#"{"kind":"cube","side":0.7}"#, "--tessellation", "16", "-o", "cube.obj"]);
    run(&["render-depth", "--mesh", "cube.obj", "--elevation", "20", "--azimuth", "30", "-o", "d.pfm"]);
    assert!(p.join("d.camera.json").exists());
    run(&["unproject", "--depth", "d.pfm", "--camera", "d.camera.json", "-o", "pts.obj"]);
    run(&["to-voxels", "--points", "pts.obj", "-o", "v.voxb"]);
    assert_eq!(io::read_voxel_grid(p.join("v.voxb")).unwrap().resolution(), 24);
    run(&["fuse", "v.voxb", "v.voxb", "--mode", "average", "-o", "f.voxb"]);
    run(&["isosurface", "f.voxb", "--iso", "0.3", "-o", "iso.obj"]);
    assert!(!io::read_mesh_obj(p.join("iso.obj")).unwrap().is_empty());
    run(&["to-spherical", "--mesh", "cube.obj", "-o", "s.voxb"]);
    run(&["inpaint", "--input", "s.voxb", "-o", "si.voxb"]);
    assert!(io::read_spherical_map(p.join("si.voxb")).unwrap().is_fully_observed());

    let out = run(&["chamfer", "pts.obj", "pts.obj"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["chamfer"], 0.0);

    run(&["eval", "--grid", "f.voxb", "--gt", "cube.obj", "--class", "box", "-o", "r.json"]);
    let report: EvalReport = io::read_json(p.join("r.json")).unwrap();
    assert_eq!(report.thresholds.len(), 9);
    assert_eq!(report.samples, 512);
    assert!(std::fs::read_to_string(p.join("r.csv")).unwrap().starts_with("class,external\nbox,"));

    run(&["dissimilarity", "--test", "cube.obj", "--train", "cube.obj", "iso.obj"]);
}

#[test]
fn data_problems_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_config(p);
    io::write_voxel_grid(p.join("zero.voxb"), &VoxelGrid::zeros(8, Extent::default()).unwrap()).unwrap();
    io::write_voxel_grid(p.join("other.voxb"), &VoxelGrid::zeros(6, Extent::default()).unwrap()).unwrap();
    ok(p, &["gen-primitive", r#"{"kind":"sphere","radius":0.5}"#, "--tessellation", "8", "-o", "s.obj"]);
    // no isosurface at any threshold
    assert_eq!(code(&sphrecon(p, &["eval", "--grid", "zero.voxb", "--gt", "s.obj"])), 3);
    // lattices differ
    assert_eq!(code(&sphrecon(p, &["fuse", "zero.voxb", "other.voxb", "-o", "x.voxb"])), 2);
    assert_eq!(code(&sphrecon(p, &["fuse", "zero.voxb", "nope.voxb", "-o", "x.voxb"])), 4);
    std::fs::write(p.join("junk.voxb"), b"VOXBjunk").unwrap();
    std::fs::copy(p.join("zero.json"), p.join("junk.json")).unwrap();
    assert_eq!(code(&sphrecon(p, &["isosurface", "junk.voxb", "-o", "x.obj"])), 4);
    assert_eq!(code(&sphrecon(p, &["gen-primitive", r#"{"kind":"blob"}"#, "-o", "x.obj"])), 2);
    // a view that misses the object entirely
    ok(p, &["--config", "small.json", "render-depth", "--mesh", "s.obj", "--elevation", "0", "--azimuth", "0", "-o", "d.voxb"]);
    io::write_depth(p.join("d.voxb"), &sphrecon::DepthMap::new(64, 64, vec![0.0; 4096], vec![false; 4096]).unwrap()).unwrap();
    let out = sphrecon(p, &["--config", "small.json", "run", "--depth", "d.voxb", "--camera", "d.camera.json", "-o", "g.voxb"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_dumps_intermediates_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_config(p);
    std::fs::write(
        p.join("batch.jsonl"),
        "{\"shape\": {\"kind\": \"cone\", \"radius\": 0.4, \"height\": 0.9}, \"class\": \"cone\", \"id\": \"c1\"}\n\n\
         {\"shape\": {\"kind\": \"torus\", \"major\": 0.35, \"minor\": 0.12}, \"class\": \"ring\"}\n",
    )
    .unwrap();
    ok(p, &["--config", "small.json", "--dump-intermediates", "dump", "run", "--manifest", "batch.jsonl", "-o", "rep.json"]);
    let report: EvalReport = io::read_json(p.join("rep.json")).unwrap();
    assert_eq!(report.objects.len(), 2);
    assert_eq!(report.classes.len(), 2);
    for name in ["fused.voxb", "completed_spherical.voxb", "view_0.depth.voxb", "view_0.camera.json", "stats.json"] {
        assert!(p.join("dump/c1").join(name).exists(), "{name}");
    }
    std::fs::write(p.join("bad.jsonl"), "{\"shape\": 3}\n").unwrap();
    assert_eq!(code(&sphrecon(p, &["run", "--manifest", "bad.jsonl"])), 4);
    assert_eq!(code(&sphrecon(p, &["run"])), 2);
}
