//! Euclidean nearest-neighbour correspondence in both directions.
//!
//! Any strictly increasing per-pair transform commutes with the inner `min`
//! of the Chamfer sum, so matching is done once on squared Euclidean
//! distances and transforms are applied afterwards.

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{sq_dist, Point3, PointCloud};
use crate::kdtree::KdTree;

/// Nearest-neighbour indices and squared distances, `a -> b` and `b -> a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// `fwd_idx[j]` is the index in `b` nearest to `a[j]`.
    pub fwd_idx: Vec<usize>,
    pub fwd_sq: Vec<f64>,
    /// `bwd_idx[k]` is the index in `a` nearest to `b[k]`.
    pub bwd_idx: Vec<usize>,
    pub bwd_sq: Vec<f64>,
}

impl MatchResult {
    fn from_pairs(fwd: Vec<(usize, f64)>, bwd: Vec<(usize, f64)>) -> Self {
        let (fwd_idx, fwd_sq) = fwd.into_iter().unzip();
        let (bwd_idx, bwd_sq) = bwd.into_iter().unzip();
        MatchResult {
            fwd_idx,
            fwd_sq,
            bwd_idx,
            bwd_sq,
        }
    }

    pub fn fwd_len(&self) -> usize {
        self.fwd_idx.len()
    }

    pub fn bwd_len(&self) -> usize {
        self.bwd_idx.len()
    }

    /// Largest matched Euclidean distance over both directions.
    pub fn max_distance(&self) -> f64 {
        self.fwd_sq
            .iter()
            .chain(&self.bwd_sq)
            .fold(0.0f64, |m, &s| m.max(s))
            .sqrt()
    }
}

fn scan_nearest(q: &Point3, targets: &[Point3]) -> (usize, f64) {
    let mut best = (0, sq_dist(q, &targets[0]));
    for (k, t) in targets.iter().enumerate().skip(1) {
        let d = sq_dist(q, t);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Exhaustive O(|a|·|b|) matching.
pub fn match_brute(a: &PointCloud, b: &PointCloud) -> MatchResult {
    let fwd = a.points().par_iter().map(|q| scan_nearest(q, b.points())).collect();
    let bwd = b.points().par_iter().map(|q| scan_nearest(q, a.points())).collect();
    MatchResult::from_pairs(fwd, bwd)
}

/// Kd-tree matching. Produces exactly the same result as [`match_brute`].
pub fn match_indexed(a: &PointCloud, b: &PointCloud) -> MatchResult {
    let tree_b = KdTree::build(b.points());
    let tree_a = KdTree::build(a.points());
    let fwd = a.points().par_iter().map(|q| tree_b.nearest(q)).collect();
    let bwd = b.points().par_iter().map(|q| tree_a.nearest(q)).collect();
    MatchResult::from_pairs(fwd, bwd)
}
