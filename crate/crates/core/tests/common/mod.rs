#![allow(dead_code)]

use sphrecon::rng::SeqRng;
use sphrecon::{Pose, Vec3};

/// Smallest positive `t` with `|o + t d| = r`.
pub fn ray_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<f64> {
    let a = d.dot(d);
    let b = 2.0 * o.dot(d);
    let c = o.dot(o) - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
        .into_iter()
        .find(|t| *t > 0.0)
}

pub fn random_unit(rng: &mut SeqRng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_pose(rng: &mut SeqRng, max_shift: f64) -> Pose {
    let axis = random_unit(rng);
    let angle = rng.uniform(0.0, std::f64::consts::TAU);
    let t = Vec3::new(
        rng.uniform(-max_shift, max_shift),
        rng.uniform(-max_shift, max_shift),
        rng.uniform(-max_shift, max_shift),
    );
    Pose::from_axis_angle(axis, angle, t).unwrap()
}

pub fn random_points(rng: &mut SeqRng, n: usize, half: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)))
        .collect()
}

/// Directed mean nearest distance by exhaustive search.
pub fn mean_min_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut sum = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            best = best.min((p - q).norm());
        }
        sum += best;
    }
    sum / a.len() as f64
}
