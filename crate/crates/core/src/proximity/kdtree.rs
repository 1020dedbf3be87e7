//! Static kd-tree over expert states for Euclidean nearest-neighbour distance.

use crate::traj::euclidean;

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub struct KdTree {
    dim: usize,
    /// Points reordered so every node owns a contiguous range.
    points: Vec<f64>,
    root: Node,
}

impl KdTree {
    /// Build from a flat row-major buffer of `n × dim` coordinates.
    pub fn build(dim: usize, flat: &[f64]) -> Self {
        assert!(dim > 0 && !flat.is_empty() && flat.len().is_multiple_of(dim));
        let n = flat.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let root = Self::build_node(dim, flat, &mut order, 0);
        let mut points = Vec::with_capacity(flat.len());
        for &i in &order {
            points.extend_from_slice(&flat[i * dim..(i + 1) * dim]);
        }
        Self { dim, points, root }
    }

    fn build_node(dim: usize, flat: &[f64], idx: &mut [usize], offset: usize) -> Node {
        let n = idx.len();
        if n <= LEAF_SIZE {
            return Node::Leaf {
                start: offset,
                end: offset + n,
            };
        }
        // split on the axis of largest spread
        let axis = (0..dim)
            .map(|ax| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = flat[i * dim + ax];
                    (lo.min(v), hi.max(v))
                });
                (ax, hi - lo)
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
            .0;
        let mid = n / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| flat[a * dim + axis].total_cmp(&flat[b * dim + axis]));
        let value = flat[idx[mid] * dim + axis];
        let (l, r) = idx.split_at_mut(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(dim, flat, l, offset)),
            right: Box::new(Self::build_node(dim, flat, r, offset + mid)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `q` to its nearest point. Uses the same distance
    /// routine as the brute-force scan, so the returned value matches it.
    pub fn nearest_distance(&self, q: &[f64]) -> f64 {
        debug_assert_eq!(q.len(), self.dim);
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        best
    }

    fn search(&self, node: &Node, q: &[f64], best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in self.points[start * self.dim..end * self.dim].chunks_exact(self.dim) {
                    let d = euclidean(q, p);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // small slack keeps rounding in the plane distance from pruning a tie
                if diff.abs() <= *best * (1.0 + 1e-12) {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_scan() {
        let mut state = 7u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0
        };
        for dim in [1, 2, 3, 6] {
            let pts: Vec<f64> = (0..300 * dim).map(|_| next()).collect();
            let tree = KdTree::build(dim, &pts);
            assert_eq!(tree.len(), 300);
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| next()).collect();
                let brute = pts
                    .chunks_exact(dim)
                    .map(|p| euclidean(&q, p))
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(tree.nearest_distance(&q), brute);
            }
        }
    }

    #[test]
    fn duplicates_and_single_point() {
        let pts = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let tree = KdTree::build(2, &pts);
        assert_eq!(tree.nearest_distance(&[4.0, 5.0]), 5.0);
        let one = KdTree::build(2, &[0.0, 0.0]);
        assert_eq!(one.nearest_distance(&[3.0, 4.0]), 5.0);
    }
}
