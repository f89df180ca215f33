//! Closed, outward-oriented primitive meshes centered at the origin.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TriangleMesh, Vec3};

pub const MIN_TESSELLATION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Sphere { radius: f64 },
    Cube { side: f64 },
    /// Axis-aligned box; a thin one is a slab.
    Cuboid { size: [f64; 3] },
    /// Apex on `+z`.
    Cone { radius: f64, height: f64 },
    Cylinder { radius: f64, height: f64 },
    /// Ring in the `xy` plane.
    Torus { major: f64, minor: f64 },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Sphere { .. } => "sphere",
            Primitive::Cube { .. } => "cube",
            Primitive::Cuboid { .. } => "cuboid",
            Primitive::Cone { .. } => "cone",
            Primitive::Cylinder { .. } => "cylinder",
            Primitive::Torus { .. } => "torus",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Primitive::Sphere { radius } => vec![radius],
            Primitive::Cube { side } => vec![side],
            Primitive::Cuboid { size } => size.to_vec(),
            Primitive::Cone { radius, height } | Primitive::Cylinder { radius, height } => {
                vec![radius, height]
            }
            Primitive::Torus { major, minor } => vec![major, minor],
        }
    }
}

pub fn generate_primitive(kind: &Primitive, tessellation: usize) -> Result<TriangleMesh> {
    if tessellation < MIN_TESSELLATION {
        return Err(Error::contract(format!(
            "tessellation {tessellation} below minimum {MIN_TESSELLATION}"
        )));
    }
    if let Some(p) = kind.params().into_iter().find(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::contract(format!(
            "{} parameter {p} must be positive",
            kind.name()
        )));
    }
    match *kind {
        Primitive::Sphere { radius } => uv_sphere(radius, tessellation),
        Primitive::Cube { side } => cuboid(Vec3::repeat(side)),
        Primitive::Cuboid { size } => cuboid(Vec3::from(size)),
        Primitive::Cone { radius, height } => cone(radius, height, tessellation),
        Primitive::Cylinder { radius, height } => cylinder(radius, height, tessellation),
        Primitive::Torus { major, minor } => {
            if minor >= major {
                return Err(Error::contract(format!(
                    "torus minor radius {minor} must be below major radius {major}"
                )));
            }
            torus(major, minor, tessellation)
        }
    }
}

fn uv_sphere(radius: f64, tess: usize) -> Result<TriangleMesh> {
    let seg = tess;
    let rings = (tess / 2).max(4);
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..rings {
        let theta = std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..seg {
            let phi = TAU * j as f64 / seg as f64;
            v.push(Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius);
        }
    }
    let bottom = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -radius));
    let ring = |i: usize, j: usize| (1 + (i - 1) * seg + j % seg) as u32;
    let mut t = Vec::new();
    for j in 0..seg {
        t.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..rings - 1 {
        for j in 0..seg {
            let (u0, u1, l0, l1) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            t.push([u0, l0, l1]);
            t.push([u0, l1, u1]);
        }
    }
    for j in 0..seg {
        t.push([ring(rings - 1, j), bottom, ring(rings - 1, j + 1)]);
    }
    TriangleMesh::new(v, t)
}

/// Axis-aligned box of the given size centered at the origin.
pub fn cuboid(size: Vec3) -> Result<TriangleMesh> {
    let v: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                ((i & 1) as f64 - 0.5) * size.x,
                (((i >> 1) & 1) as f64 - 0.5) * size.y,
                (((i >> 2) & 1) as f64 - 0.5) * size.z,
            )
        })
        .collect();
    let mut t = Vec::with_capacity(12);
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2u32 {
            let mut quad: Vec<u32> = [(0, 0), (1, 0), (1, 1), (0, 1)]
                .iter()
                .map(|&(sb, sc): &(u32, u32)| (side << axis) | (sb << b) | (sc << c))
                .collect();
            let [p0, p1, p2] = [0, 1, 2].map(|k| v[quad[k] as usize]);
            let outward = if side == 1 { 1.0 } else { -1.0 };
            if (p1 - p0).cross(&(p2 - p0))[axis] * outward < 0.0 {
                quad.reverse();
            }
            t.push([quad[0], quad[1], quad[2]]);
            t.push([quad[0], quad[2], quad[3]]);
        }
    }
    TriangleMesh::new(v, t)
}

fn ring_points(radius: f64, z: f64, seg: usize) -> impl Iterator<Item = Vec3> {
    (0..seg).map(move |j| {
        let phi = TAU * j as f64 / seg as f64;
        Vec3::new(radius * phi.cos(), radius * phi.sin(), z)
    })
}

fn cone(radius: f64, height: f64, seg: usize) -> Result<TriangleMesh> {
    let mut v: Vec<Vec3> = ring_points(radius, -0.5 * height, seg).collect();
    let apex = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, 0.5 * height));
    let center = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -0.5 * height));
    let b = |j: usize| (j % seg) as u32;
    let mut t = Vec::with_capacity(2 * seg);
    for j in 0..seg {
        t.push([b(j), b(j + 1), apex]);
        t.push([center, b(j + 1), b(j)]);
    }
    TriangleMesh::new(v, t)
}

fn cylinder(radius: f64, height: f64, seg: usize) -> Result<TriangleMesh> {
    let mut v: Vec<Vec3> = ring_points(radius, -0.5 * height, seg).collect();
    v.extend(ring_points(radius, 0.5 * height, seg));
    let cb = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -0.5 * height));
    let ct = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, 0.5 * height));
    let b = |j: usize| (j % seg) as u32;
    let top = |j: usize| (seg + j % seg) as u32;
    let mut t = Vec::with_capacity(4 * seg);
    for j in 0..seg {
        t.push([b(j), b(j + 1), top(j + 1)]);
        t.push([b(j), top(j + 1), top(j)]);
        t.push([ct, top(j), top(j + 1)]);
        t.push([cb, b(j + 1), b(j)]);
    }
    TriangleMesh::new(v, t)
}

fn torus(major: f64, minor: f64, tess: usize) -> Result<TriangleMesh> {
    let nu = tess;
    let nv = (tess / 2).max(4);
    let mut v = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let phi = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let theta = TAU * j as f64 / nv as f64;
            let rho = major + minor * theta.cos();
            v.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), minor * theta.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut t = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            t.push([a, b, c]);
            t.push([a, c, d]);
        }
    }
    TriangleMesh::new(v, t)
}
