//! Static 3D kd-tree for exact nearest-neighbour queries.
//!
//! Queries return the same neighbour as a linear scan: equal squared
//! distances resolve to the smallest point index, and pruning only discards
//! subtrees whose bounding box is strictly farther than the current best.

use crate::geometry::{sq_dist, Point3};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    /// Leaves cover `order[start..end]`; inner nodes point at two children.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    /// Builds the tree over `points`. Panics if `points` is empty.
    pub fn build(points: &'a [Point3]) -> Self {
        assert!(!points.is_empty(), "kd-tree over an empty point set");
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            start,
            end,
            children: None,
        });

        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        // all points coincide: splitting would not separate anything
        if end - start <= LEAF_SIZE || hi[axis] <= lo[axis] {
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i][axis].total_cmp(&points[j][axis]).then(i.cmp(&j))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    #[inline]
    fn box_sq_dist(node: &Node, q: &Point3) -> f64 {
        let gap = |a: usize| {
            if q[a] < node.lo[a] {
                node.lo[a] - q[a]
            } else if q[a] > node.hi[a] {
                q[a] - node.hi[a]
            } else {
                0.0
            }
        };
        let (gx, gy, gz) = (gap(0), gap(1), gap(2));
        gx * gx + gy * gy + gz * gz
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, id: usize, q: &Point3, best: &mut (usize, f64)) {
        let node = &self.nodes[id];
        match node.children {
            None => {
                for &i in &self.order[node.start..node.end] {
                    let d = sq_dist(q, &self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Some((l, r)) => {
                let dl = Self::box_sq_dist(&self.nodes[l], q);
                let dr = Self::box_sq_dist(&self.nodes[r], q);
                let ((first, df), (second, ds)) = if dl <= dr { ((l, dl), (r, dr)) } else { ((r, dr), (l, dl)) };
                if df <= best.1 {
                    self.search(first, q, best);
                }
                if ds <= best.1 {
                    self.search(second, q, best);
                }
            }
        }
    }
}
