//! Wavefront OBJ, `v` and `f` records only.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so write-then-read reproduces every vertex bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{PointCloud, TriangleMesh, Vec3};

pub fn mesh_to_obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices().len() * 40 + mesh.triangles().len() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn points_to_obj_string(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 40);
    for v in cloud.points() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    out
}

/// Parse OBJ text. Polygons are fan-triangulated; `f a/b/c` texture and
/// normal references are ignored; negative (relative) indices are resolved.
pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let tok = fields.next().ok_or_else(|| {
                        Error::format(format!("line {}: vertex needs 3 coordinates", lineno + 1))
                    })?;
                    *slot = tok.parse().map_err(|_| {
                        Error::format(format!("line {}: bad coordinate {tok:?}", lineno + 1))
                    })?;
                }
                vertices.push(Vec3::from(c));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in fields {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = head.parse().map_err(|_| {
                        Error::format(format!("line {}: bad face index {tok:?}", lineno + 1))
                    })?;
                    let resolved = match raw {
                        0 => None,
                        r if r > 0 => Some(r - 1),
                        r => Some(vertices.len() as i64 + r),
                    };
                    match resolved {
                        Some(i) if i >= 0 && (i as usize) < vertices.len() => idx.push(i as u32),
                        _ => {
                            return Err(Error::format(format!(
                                "line {}: face index {raw} out of range",
                                lineno + 1
                            )))
                        }
                    }
                }
                if idx.len() < 3 {
                    return Err(Error::format(format!(
                        "line {}: face needs at least 3 vertices",
                        lineno + 1
                    )));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

pub fn write_mesh_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    std::fs::write(path, mesh_to_obj_string(mesh))?;
    Ok(())
}

pub fn read_mesh_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let (v, t) = parse_obj(&text)?;
    TriangleMesh::new(v, t).map_err(|e| Error::format(format!("invalid mesh: {e}")))
}

pub fn write_points_obj(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, points_to_obj_string(cloud))?;
    Ok(())
}

/// Read the `v` records of an OBJ file as a point cloud.
pub fn read_points_obj(path: impl AsRef<Path>) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let (v, _) = parse_obj(&text)?;
    PointCloud::new(v).map_err(|e| Error::format(format!("invalid point cloud: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quads_and_slashes_and_negative_indices() {
        let text = "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\nf -4 -3 -2\n";
        let (v, t) = parse_obj(text).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn rejects_out_of_range_faces() {
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(parse_obj("v 0 0\n").is_err());
    }

    #[test]
    fn vertex_text_round_trips_exactly() {
        let v = vec![
            Vec3::new(0.1, 1.0 / 3.0, -2.5e-17),
            Vec3::new(1e300, -0.0, 7.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let m = TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
        let (back, tris) = parse_obj(&mesh_to_obj_string(&m)).unwrap();
        assert_eq!(tris, vec![[0, 1, 2]]);
        for (a, b) in v.iter().zip(&back) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }
}
