//! Ray casting against triangle meshes and small geometric helpers.

use crate::types::{TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    /// Not necessarily unit length; hit parameters are in multiples of it.
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: u32,
}

impl Hit {
    /// Nearest first; exact ties go to the lower triangle index.
    #[inline]
    fn better_than(&self, other: &Hit) -> bool {
        self.t < other.t || (self.t == other.t && self.triangle < other.triangle)
    }
}

/// Watertight ray/triangle test (shear-and-scale formulation).
///
/// Edge functions are evaluated in a ray-aligned frame, so a ray through a
/// shared edge or vertex hits at least one of the adjacent triangles. Returns
/// the hit parameter in `(0, t_max]`. Both faces count as hits.
pub fn intersect_triangle(ray: &Ray, p0: &Vec3, p1: &Vec3, p2: &Vec3, t_max: f64) -> Option<f64> {
    let d = ray.dir;
    let kz = d.iamax();
    let kx = (kz + 1) % 3;
    let ky = (kx + 1) % 3;
    if d[kz] == 0.0 {
        return None;
    }
    let sx = -d[kx] / d[kz];
    let sy = -d[ky] / d[kz];
    let sz = 1.0 / d[kz];

    let a = p0 - ray.origin;
    let b = p1 - ray.origin;
    let c = p2 - ray.origin;
    let (ax, ay) = (a[kx] + sx * a[kz], a[ky] + sy * a[kz]);
    let (bx, by) = (b[kx] + sx * b[kz], b[ky] + sy * b[kz]);
    let (cx, cy) = (c[kx] + sx * c[kz], c[ky] + sy * c[kz]);

    let e0 = bx * cy - by * cx;
    let e1 = cx * ay - cy * ax;
    let e2 = ax * by - ay * bx;
    if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) && (e0 > 0.0 || e1 > 0.0 || e2 > 0.0) {
        return None;
    }
    let det = e0 + e1 + e2;
    if det == 0.0 {
        return None;
    }
    let t_scaled = e0 * (a[kz] * sz) + e1 * (b[kz] * sz) + e2 * (c[kz] * sz);
    if det < 0.0 && (t_scaled >= 0.0 || t_scaled < t_max * det) {
        return None;
    }
    if det > 0.0 && (t_scaled <= 0.0 || t_scaled > t_max * det) {
        return None;
    }
    Some(t_scaled / det)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    /// Entry parameter of the ray into the box, if it enters before `t_max`.
    #[inline]
    fn entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let mut near = (self.min[k] - origin[k]) * inv_dir[k];
            let mut far = (self.max[k] - origin[k]) * inv_dir[k];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: u32, count: u32 },
    Inner { bounds: Aabb, left: u32, right: u32 },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle ids in leaf order.
    order: Vec<u32>,
    tris: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangles().len()).map(|t| mesh.triangle(t)).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let boxes: Vec<Aabb> = tris
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                t.iter().for_each(|p| b.grow(p));
                // pad so that rays grazing a flat box still enter it
                let pad = 1e-9 * (1.0 + b.max.abs().max().max(b.min.abs().max()));
                b.min.add_scalar_mut(-pad);
                b.max.add_scalar_mut(pad);
                b
            })
            .collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        if !tris.is_empty() {
            build_node(&mut nodes, &mut order, 0, &centroids, &boxes);
        }
        Self { nodes, order, tris }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Closest hit with parameter in `(0, t_max]`.
    pub fn closest_hit(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            // boxes entered exactly at the current best may still hold a
            // lower-index tie, so only prune strictly farther boxes
            if node.bounds().entry(&ray.origin, &inv, limit).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &tri in &self.order[start as usize..(start + count) as usize] {
                        let [a, b, c] = &self.tris[tri as usize];
                        if let Some(t) = intersect_triangle(ray, a, b, c, limit) {
                            let hit = Hit { t, triangle: tri };
                            if best.is_none_or(|bh| hit.better_than(&bh)) {
                                best = Some(hit);
                                limit = t;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let tl = self.nodes[left as usize].bounds().entry(&ray.origin, &inv, limit);
                    let tr = self.nodes[right as usize].bounds().entry(&ray.origin, &inv, limit);
                    match (tl, tr) {
                        (Some(a), Some(b)) => {
                            if a <= b {
                                stack.push(right);
                                stack.push(left);
                            } else {
                                stack.push(left);
                                stack.push(right);
                            }
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    offset: u32,
    centroids: &[Vec3],
    boxes: &[Aabb],
) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in order.iter() {
        bounds.merge(&boxes[t as usize]);
        cbounds.grow(&centroids[t as usize]);
    }
    let id = nodes.len() as u32;
    let extent = cbounds.max - cbounds.min;
    if order.len() <= LEAF_SIZE || extent.max() <= 0.0 {
        nodes.push(Node::Leaf {
            bounds,
            start: offset,
            count: order.len() as u32,
        });
        return id;
    }
    let axis = extent.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        count: 0,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, centroids, boxes);
    let right = build_node(nodes, hi, offset + mid as u32, centroids, boxes);
    nodes[id as usize] = Node::Inner {
        bounds,
        left,
        right,
    };
    id
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Brute-force distance from `p` to the nearest point of `mesh`.
pub fn point_mesh_distance(p: &Vec3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}
