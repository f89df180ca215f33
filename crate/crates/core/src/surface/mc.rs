//! Marching cubes over a [`VoxelGrid`].
//!
//! Grid values are sampled at voxel centers. The lattice is padded with one
//! layer of zeros on every side, so any finite occupied region yields a
//! closed surface. Values above `iso` are inside; triangles wind
//! counter-clockwise seen from outside.
//!
//! The 256-entry case table is derived from the cube's faces rather than
//! typed in. Each face is walked counter-clockwise seen from outside and the
//! iso-contour segments on it always cut off runs of inside corners, so on an
//! ambiguous face (inside corners on one diagonal) the two inside corners are
//! kept apart. The decision depends only on the four corners of the face,
//! which both neighboring cubes share, so the resulting mesh has no cracks.
//! Up to rotation and complement this reproduces the classic 15 cases.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::types::{TriangleMesh, Vec3, VoxelGrid};

/// Added to corner values that sit exactly on the iso level.
pub const ISO_NUDGE: f64 = 1e-9;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const FACES: [[usize; 4]; 6] = [
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

/// Per configuration, the contour loops as lists of cube-edge ids.
pub struct CaseTable {
    loops: Vec<Vec<Vec<u8>>>,
}

impl CaseTable {
    pub fn loops(&self, config: u8) -> &[Vec<u8>] {
        &self.loops[config as usize]
    }

    pub fn triangle_count(&self, config: u8) -> usize {
        self.loops(config).iter().map(|l| l.len() - 2).sum()
    }
}

fn edge_between(a: usize, b: usize) -> u8 {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("face corners are adjacent") as u8
}

fn corner_pos(c: usize) -> Vec3 {
    Vec3::new(CORNERS[c][0] as f64, CORNERS[c][1] as f64, CORNERS[c][2] as f64)
}

fn oriented_faces() -> [[usize; 4]; 6] {
    let mut out = FACES;
    for face in &mut out {
        let [a, b, c, d] = face.map(corner_pos);
        let normal = (b - a).cross(&(c - a));
        let outward = (a + b + c + d) / 4.0 - Vec3::repeat(0.5);
        if normal.dot(&outward) < 0.0 {
            face.reverse();
        }
    }
    out
}

fn build_table() -> CaseTable {
    let faces = oriented_faces();
    let mut loops = Vec::with_capacity(256);
    for config in 0..256usize {
        let inside = |c: usize| config & (1 << c) != 0;
        // next[e] = edge reached from crossing e along its face segment
        let mut next = [u8::MAX; 12];
        for face in &faces {
            for p in 0..4 {
                let (a, b) = (face[p], face[(p + 1) % 4]);
                if inside(a) || !inside(b) {
                    continue;
                }
                let enter = edge_between(a, b);
                let mut q = (p + 1) % 4;
                while inside(face[(q + 1) % 4]) {
                    q = (q + 1) % 4;
                }
                let exit = edge_between(face[q], face[(q + 1) % 4]);
                debug_assert_eq!(next[enter as usize], u8::MAX);
                next[enter as usize] = exit;
            }
        }
        let mut visited = [false; 12];
        let mut case_loops = Vec::new();
        for start in 0..12 {
            if next[start] == u8::MAX || visited[start] {
                continue;
            }
            let mut l = Vec::new();
            let mut e = start;
            while !visited[e] {
                visited[e] = true;
                l.push(e as u8);
                e = next[e] as usize;
            }
            debug_assert_eq!(e, start);
            case_loops.push(l);
        }
        loops.push(case_loops);
    }
    CaseTable { loops }
}

pub fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Extract the `iso` level set of `grid`.
pub fn marching_cubes(grid: &VoxelGrid, iso: f64) -> Result<TriangleMesh> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(Error::contract(format!("iso level {iso} must lie in (0, 1)")));
    }
    let n = grid.resolution();
    if n < 2 {
        return Err(Error::contract(format!("marching cubes needs resolution >= 2, got {n}")));
    }
    let table = case_table();
    // padded corner lattice, index p in 0..m maps to grid index p - 1
    let m = n + 2;
    let lin = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
    let mut vals = vec![0.0f64; m * m * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = grid.get(i, j, k) as f64;
                vals[lin(i + 1, j + 1, k + 1)] = if v == iso { iso + ISO_NUDGE } else { v };
            }
        }
    }
    let h = grid.voxel_size();
    let origin = grid.extent().min_corner() + Vec3::repeat(-0.5 * h);
    let pos = |i: usize, j: usize, k: usize| origin + Vec3::new(i as f64, j as f64, k as f64) * h;

    // lazily assigned vertex id per lattice edge (base corner, axis)
    let mut edge_vertex = vec![u32::MAX; m * m * m * 3];
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for i in 0..m - 1 {
        for j in 0..m - 1 {
            for k in 0..m - 1 {
                let mut config = 0u8;
                for (c, off) in CORNERS.iter().enumerate() {
                    if vals[lin(i + off[0], j + off[1], k + off[2])] > iso {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 0xFF {
                    continue;
                }
                let mut ids = [u32::MAX; 12];
                for l in table.loops(config) {
                    for &e in l {
                        let [ca, cb] = EDGES[e as usize];
                        let (oa, ob) = (CORNERS[ca], CORNERS[cb]);
                        let base = [i + oa[0].min(ob[0]), j + oa[1].min(ob[1]), k + oa[2].min(ob[2])];
                        let axis = (0..3).find(|&a| oa[a] != ob[a]).unwrap();
                        let slot = lin(base[0], base[1], base[2]) * 3 + axis;
                        if edge_vertex[slot] == u32::MAX {
                            let pa = [i + oa[0], j + oa[1], k + oa[2]];
                            let pb = [i + ob[0], j + ob[1], k + ob[2]];
                            let va = vals[lin(pa[0], pa[1], pa[2])];
                            let vb = vals[lin(pb[0], pb[1], pb[2])];
                            let t = (iso - va) / (vb - va);
                            let xa = pos(pa[0], pa[1], pa[2]);
                            let xb = pos(pb[0], pb[1], pb[2]);
                            edge_vertex[slot] = vertices.len() as u32;
                            vertices.push(xa + (xb - xa) * t);
                        }
                        ids[e as usize] = edge_vertex[slot];
                    }
                    let first = ids[l[0] as usize];
                    for w in l[1..].windows(2) {
                        triangles.push([first, ids[w[0] as usize], ids[w[1] as usize]]);
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}
