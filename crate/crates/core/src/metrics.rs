//! Chamfer distance, the isosurface threshold sweep, evaluation reports, and
//! class dissimilarity.
//!
//! Chamfer distance is the sum of the two directed mean nearest-neighbor
//! Euclidean distances. The indexed path finds exactly the same nearest
//! distance per query as brute force and sums in query order, so both paths
//! agree bit for bit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::surface::{marching_cubes, sample_surface};
use crate::types::{PointCloud, TriangleMesh, Vec3, VoxelGrid};

/// Isosurface levels of the sweep, 0.30 to 0.70 in steps of 0.05.
pub const THRESHOLDS: [f64; 9] = [0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70];
pub const DEFAULT_SAMPLES: usize = 1024;
pub const REPORT_SCHEMA_VERSION: u32 = 1;


fn check_non_empty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract(format!(
            "chamfer needs non-empty clouds, got {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn brute_nearest(q: &Vec3, points: &[Vec3]) -> f64 {
    points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

fn mean_in_order(d: &[f64]) -> f64 {
    d.iter().sum::<f64>() / d.len() as f64
}

/// O(|a|·|b|) reference implementation.
pub fn chamfer_brute(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_non_empty(a, b)?;
    let ab: Vec<f64> = a.points().iter().map(|q| brute_nearest(q, b.points())).collect();
    let ba: Vec<f64> = b.points().iter().map(|q| brute_nearest(q, a.points())).collect();
    Ok(mean_in_order(&ab) + mean_in_order(&ba))
}

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
struct KdNode {
    lo: Vec3,
    hi: Vec3,
    start: u32,
    end: u32,
    /// Index of the first child; the second follows it. 0 marks a leaf.
    child: u32,
}

/// k-d tree over a point set for exact nearest-distance queries.
///
/// Subtrees are pruned only when their box is farther than the best
/// distance found so far plus a small slack, so every query returns the
/// same value as a linear scan.
pub struct NearestIndex<'a> {
    points: &'a [Vec3],
    order: Vec<u32>,
    nodes: Vec<KdNode>,
    slack: f64,
}

impl<'a> NearestIndex<'a> {
    pub fn build(points: &'a [Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::contract("cannot index an empty point set"));
        }
        let mut index = Self {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
            slack: 0.0,
        };
        index.nodes.push(KdNode {
            lo: Vec3::zeros(),
            hi: Vec3::zeros(),
            start: 0,
            end: 0,
            child: 0,
        });
        index.fill(0, 0, points.len());
        let root = index.nodes[0];
        index.slack = 1e-12 * (root.lo.abs().max() + root.hi.abs().max() + (root.hi - root.lo).norm());
        Ok(index)
    }

    /// Build the subtree over `order[start..end]` into the reserved `slot`.
    /// Children are allocated as a pair, so the second is `child + 1`.
    fn fill(&mut self, slot: usize, start: usize, end: usize) {
        let points = self.points;
        let ids = &self.order[start..end];
        let first = points[ids[0] as usize];
        let (lo, hi) = ids.iter().fold((first, first), |(lo, hi), &i| {
            let p = &points[i as usize];
            (lo.inf(p), hi.sup(p))
        });
        let mut node = KdNode {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            child: 0,
        };
        if end - start > LEAF_SIZE {
            let axis = (hi - lo).imax();
            let mid = (end - start) / 2;
            self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
                points[a as usize][axis]
                    .total_cmp(&points[b as usize][axis])
                    .then(a.cmp(&b))
            });
            node.child = self.nodes.len() as u32;
            self.nodes.push(node);
            self.nodes.push(node);
            self.nodes[slot] = node;
            self.fill(node.child as usize, start, start + mid);
            self.fill(node.child as usize + 1, start + mid, end);
        } else {
            self.nodes[slot] = node;
        }
    }

    fn box_distance(n: &KdNode, q: &Vec3) -> f64 {
        let d = Vec3::from_fn(|k, _| (n.lo[k] - q[k]).max(q[k] - n.hi[k]).max(0.0));
        d.norm()
    }

    /// Distance from `q` to the nearest indexed point.
    pub fn nearest_distance(&self, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((n, dist)) = stack.pop() {
            if dist - self.slack > best {
                continue;
            }
            let node = &self.nodes[n];
            if node.child == 0 {
                for &i in &self.order[node.start as usize..node.end as usize] {
                    let d = (self.points[i as usize] - q).norm();
                    if d < best {
                        best = d;
                    }
                }
                continue;
            }
            let (a, b) = (node.child as usize, node.child as usize + 1);
            let (da, db) = (Self::box_distance(&self.nodes[a], q), Self::box_distance(&self.nodes[b], q));
            if da <= db {
                stack.push((b, db));
                stack.push((a, da));
            } else {
                stack.push((a, da));
                stack.push((b, db));
            }
        }
        best
    }
}

fn directed_indexed(queries: &[Vec3], index: &NearestIndex) -> f64 {
    let d: Vec<f64> = queries.par_iter().map(|q| index.nearest_distance(q)).collect();
    mean_in_order(&d)
}

/// Chamfer distance through a spatial index; equal to [`chamfer_brute`].
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_non_empty(a, b)?;
    let ia = NearestIndex::build(a.points())?;
    let ib = NearestIndex::build(b.points())?;
    Ok(directed_indexed(a.points(), &ib) + directed_indexed(b.points(), &ia))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// Chamfer distance per threshold; `+∞` where the isosurface is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub thresholds: Vec<f64>,
    pub cds: Vec<f64>,
}

impl Sweep {
    /// Lowest CD and its threshold; the lower threshold wins ties.
    pub fn best(&self) -> (f64, f64) {
        let mut best = (self.thresholds[0], self.cds[0]);
        for (&t, &cd) in self.thresholds.iter().zip(&self.cds).skip(1) {
            if cd < best.1 {
                best = (t, cd);
            }
        }
        best
    }
}

/// Seed used for sampling predicted isosurfaces when `seed` samples ground truth.
pub fn prediction_seed(seed: u64) -> u64 {
    SplitMix64::new(seed).u64_at(0)
}

pub fn eval_sweep(pred: &VoxelGrid, gt: &TriangleMesh, cfg: &SweepConfig) -> Result<Sweep> {
    if cfg.samples == 0 {
        return Err(Error::contract("sample count must be positive"));
    }
    let gt_points = sample_surface(gt, cfg.samples, cfg.seed)?;
    let gt_index = NearestIndex::build(gt_points.points())?;
    let pred_seed = prediction_seed(cfg.seed);
    let mut cds = Vec::with_capacity(THRESHOLDS.len());
    for &t in &THRESHOLDS {
        let mesh = marching_cubes(pred, t)?;
        let cd = if mesh.is_empty() {
            f64::INFINITY
        } else {
            match sample_surface(&mesh, cfg.samples, pred_seed) {
                Ok(p) => {
                    let pi = NearestIndex::build(p.points())?;
                    directed_indexed(p.points(), &gt_index) + directed_indexed(gt_points.points(), &pi)
                }
                Err(Error::Degenerate(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            }
        };
        cds.push(cd);
    }
    if cds.iter().all(|c| c.is_infinite()) {
        return Err(Error::EmptyPrediction);
    }
    Ok(Sweep {
        thresholds: THRESHOLDS.to_vec(),
        cds,
    })
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectResult {
    pub id: String,
    pub class: String,
    pub model: String,
    /// One entry per threshold; `null` marks an empty isosurface.
    pub cds: Vec<Option<f64>>,
}

impl ObjectResult {
    pub fn from_sweep(id: &str, class: &str, model: &str, sweep: &Sweep) -> Self {
        Self {
            id: id.to_string(),
            class: class.to_string(),
            model: model.to_string(),
            cds: sweep.cds.iter().map(|&c| finite(c)).collect(),
        }
    }

    pub fn best_cd(&self) -> Option<f64> {
        self.cds.iter().flatten().copied().reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSummary {
    pub class: String,
    pub model: String,
    pub objects: usize,
    /// Per-threshold mean over objects; `null` when any object is empty there.
    pub mean_cds: Vec<Option<f64>>,
    pub best_mean_cd: Option<f64>,
    pub best_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub thresholds: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub objects: Vec<ObjectResult>,
    pub classes: Vec<ClassSummary>,
}

impl EvalReport {
    /// Aggregate per-object sweeps. Objects are sorted by class, model, and
    /// id first, so the result does not depend on input order.
    pub fn new(mut objects: Vec<ObjectResult>, samples: usize, seed: u64) -> Result<Self> {
        if let Some(o) = objects.iter().find(|o| o.cds.len() != THRESHOLDS.len()) {
            return Err(Error::contract(format!(
                "object {} has {} CDs for {} thresholds",
                o.id,
                o.cds.len(),
                THRESHOLDS.len()
            )));
        }
        objects.sort_by(|a, b| (&a.class, &a.model, &a.id).cmp(&(&b.class, &b.model, &b.id)));
        let mut groups: BTreeMap<(String, String), Vec<&ObjectResult>> = BTreeMap::new();
        for o in &objects {
            groups.entry((o.class.clone(), o.model.clone())).or_default().push(o);
        }
        let classes = groups
            .into_iter()
            .map(|((class, model), members)| {
                let mean_cds: Vec<Option<f64>> = (0..THRESHOLDS.len())
                    .map(|t| {
                        let mut sum = 0.0;
                        for o in &members {
                            sum += o.cds[t]?;
                        }
                        Some(sum / members.len() as f64)
                    })
                    .collect();
                let mut best: Option<(f64, f64)> = None;
                for (&t, m) in THRESHOLDS.iter().zip(&mean_cds) {
                    if let Some(m) = *m {
                        if best.is_none_or(|(_, b)| m < b) {
                            best = Some((t, m));
                        }
                    }
                }
                ClassSummary {
                    class,
                    model,
                    objects: members.len(),
                    mean_cds,
                    best_mean_cd: best.map(|b| b.1),
                    best_threshold: best.map(|b| b.0),
                }
            })
            .collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            thresholds: THRESHOLDS.to_vec(),
            samples,
            seed,
            objects,
            classes,
        })
    }

    /// Classes as rows, models as columns, best mean CD in each cell.
    pub fn to_csv(&self) -> String {
        let mut models: Vec<&str> = self.classes.iter().map(|c| c.model.as_str()).collect();
        models.sort_unstable();
        models.dedup();
        let mut rows: BTreeMap<&str, BTreeMap<&str, Option<f64>>> = BTreeMap::new();
        for c in &self.classes {
            rows.entry(&c.class).or_default().insert(&c.model, c.best_mean_cd);
        }
        let mut out = String::from("class");
        for m in &models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (class, cells) in rows {
            out.push_str(class);
            for m in &models {
                out.push(',');
                if let Some(Some(v)) = cells.get(m) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Mean over test shapes of the CD to the closest training shape.
pub fn class_dissimilarity(test: &[PointCloud], train: &[PointCloud]) -> Result<f64> {
    if test.is_empty() || train.is_empty() {
        return Err(Error::contract(format!(
            "class dissimilarity needs non-empty sets, got {} test and {} train shapes",
            test.len(),
            train.len()
        )));
    }
    let mut sum = 0.0;
    for x in test {
        let mut best = f64::INFINITY;
        for y in train {
            best = best.min(chamfer(x, y)?);
        }
        sum += best;
    }
    Ok(sum / test.len() as f64)
}
