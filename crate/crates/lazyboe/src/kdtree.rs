//! Static kd-tree over joint-space points with exact radius queries.
//!
//! Used as the spatial index over edge start states. Queries must return
//! exactly what a brute-force L2 scan returns, so pruning uses plain
//! axis-distance bounds with no approximation.

use crate::JointVector;

#[derive(Debug, Clone)]
struct Node {
    /// Index into `points`.
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<JointVector>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdTree {
    pub fn build(points: Vec<JointVector>) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree { points, nodes: Vec::new(), root: None };
        if dim > 0 {
            tree.root = tree.build_rec(&mut ids, 0, dim);
        }
        tree
    }

    fn build_rec(&mut self, ids: &mut [usize], depth: usize, dim: usize) -> Option<usize> {
        if ids.is_empty() {
            return None;
        }
        let axis = depth % dim;
        ids.sort_by(|&a, &b| {
            self.points[a][axis]
                .partial_cmp(&self.points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mid = ids.len() / 2;
        let point = ids[mid];
        let node_idx = self.nodes.len();
        self.nodes.push(Node { point, axis, left: None, right: None });
        let (lo, rest) = ids.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(lo, depth + 1, dim);
        let right = self.build_rec(hi, depth + 1, dim);
        self.nodes[node_idx].left = left;
        self.nodes[node_idx].right = right;
        Some(node_idx)
    }

    /// All point indices within L2 distance `radius` of `query` (inclusive),
    /// in arbitrary order.
    pub fn within_radius(&self, query: &JointVector, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            self.search(root, query, radius, &mut out);
        }
        out
    }

    fn search(&self, node_idx: usize, query: &JointVector, radius: f64, out: &mut Vec<usize>) {
        let node = &self.nodes[node_idx];
        let p = &self.points[node.point];
        if (p - query).norm() <= radius {
            out.push(node.point);
        }
        let diff = query[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, radius, out);
        }
        if let Some(f) = far {
            if diff.abs() <= radius {
                self.search(f, query, radius, out);
            }
        }
    }
}
