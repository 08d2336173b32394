//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use hypercd::{Point3, PointCloud, TransformSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cloud(pts: &[[f64; 3]]) -> PointCloud {
    PointCloud::from_arrays(pts).unwrap()
}

/// Uniform points in `[-1, 1]^3`.
pub fn uniform_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

/// Points on a coarse integer lattice, full of exact distance ties and
/// duplicates.
pub fn lattice_cloud(rng: &mut impl Rng, n: usize, side: i32) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(0..side) as f64,
                    rng.random_range(0..side) as f64,
                    rng.random_range(0..side) as f64,
                )
            })
            .collect(),
    )
    .unwrap()
}

/// A few tight clusters far apart.
pub fn clustered_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    let centres: Vec<Point3> = (0..3)
        .map(|_| Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
        .collect();
    PointCloud::new(
        (0..n)
            .map(|i| {
                let c = centres[i % centres.len()];
                c + Point3::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3))
            })
            .collect(),
    )
    .unwrap()
}

pub fn point_strategy(range: f64) -> impl Strategy<Value = Point3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

pub fn cloud_strategy(max_len: usize, range: f64) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(point_strategy(range), 1..=max_len).prop_map(|v| PointCloud::new(v).unwrap())
}

/// Lattice clouds in `{0,1,2}^3` for tie-heavy inputs.
pub fn lattice_strategy(max_len: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((0..3i32, 0..3i32, 0..3i32), 1..=max_len).prop_map(|v| {
        PointCloud::new(v.into_iter().map(|(x, y, z)| Point3::new(x as f64, y as f64, z as f64)).collect()).unwrap()
    })
}

/// Nearest neighbour by exhaustive scan, lowest index on ties.
pub fn nearest_oracle(q: &Point3, targets: &PointCloud) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (k, t) in targets.iter().enumerate() {
        let d = (*q - *t).norm_sq();
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Chamfer value taking the minimum over transformed distances of every pair.
pub fn chamfer_oracle(a: &PointCloud, b: &PointCloud, spec: &TransformSpec) -> f64 {
    let side = |x: &PointCloud, y: &PointCloud| {
        x.iter()
            .map(|p| y.iter().map(|q| spec.value((*p - *q).norm())).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    side(a, b) + side(b, a)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Every spec kind with a representative parameter choice.
pub fn all_specs() -> Vec<TransformSpec> {
    vec![
        TransformSpec::l1(),
        TransformSpec::l2(),
        TransformSpec::exp(0.7, 1.0).unwrap(),
        TransformSpec::exp(1.3, 2.0).unwrap(),
        TransformSpec::hyper(1.0, 1.0).unwrap(),
        TransformSpec::hypercd(1.0).unwrap(),
        TransformSpec::hyper(0.4, 3.0).unwrap(),
    ]
}
