//! kd-tree for fixed-radius queries under a [`Metric`].

use std::collections::BinaryHeap;

use crate::metric::Metric;

const LEAF: usize = 16;

#[derive(Clone, Debug)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    /// Children, or `usize::MAX` for leaves.
    left: usize,
    right: usize,
}

/// Spatial index over a flat row-major point array.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    dim: usize,
    metric: Metric,
    /// Points in tree order.
    pts: Vec<f64>,
    /// Original index of each point in tree order.
    perm: Vec<usize>,
    inv: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(coords: &[f64], dim: usize, metric: Metric) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "coordinate array does not match dimension");
        let n = coords.len() / dim;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF + 1);
        if n > 0 {
            build(coords, dim, &mut perm, 0, n, &mut nodes);
        }
        let mut pts = Vec::with_capacity(coords.len());
        for &i in &perm {
            pts.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        let mut inv = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            inv[i] = pos;
        }
        Self { dim, metric, pts, perm, inv, nodes }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Point with original index `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let pos = self.inv[i];
        &self.pts[pos * self.dim..(pos + 1) * self.dim]
    }

    fn box_gap2(&self, node: &Node, q: &[f64]) -> f64 {
        let mut g = 0.0;
        for a in 0..self.dim {
            let d = self.metric.axis_gap(a, q[a], node.lo[a], node.hi[a]);
            g += d * d;
        }
        g
    }

    /// Call `f(original_index, squared_distance)` for every point with
    /// `dist(q, p) ≤ r` (closed ball).
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], r: f64, mut f: F) {
        if self.nodes.is_empty() || r < 0.0 {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if self.box_gap2(node, q) > r2 {
                continue;
            }
            if node.left == usize::MAX {
                for pos in node.start..node.end {
                    let p = &self.pts[pos * self.dim..(pos + 1) * self.dim];
                    let d2 = self.metric.dist2(q, p);
                    if d2 <= r2 {
                        f(self.perm[pos], d2);
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// Like [`Self::for_each_within`], but nodes lying entirely inside the
    /// ball are reported once as a range of tree positions (see
    /// [`Self::tree_order`]) instead of point by point.
    pub fn for_each_block_within<B, F>(&self, q: &[f64], r: f64, mut block: B, mut f: F)
    where
        B: FnMut(usize, usize),
        F: FnMut(usize, f64),
    {
        if self.nodes.is_empty() || r < 0.0 {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if self.box_gap2(node, q) > r2 {
                continue;
            }
            let far2: f64 = (0..self.dim)
                .map(|a| self.metric.axis_far(a, q[a], node.lo[a], node.hi[a]).powi(2))
                .sum();
            if far2 <= r2 {
                block(node.start, node.end);
            } else if node.left == usize::MAX {
                for pos in node.start..node.end {
                    let d2 = self.metric.dist2(q, &self.pts[pos * self.dim..(pos + 1) * self.dim]);
                    if d2 <= r2 {
                        f(self.perm[pos], d2);
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// Original index of the point at each tree position.
    pub fn tree_order(&self) -> &[usize] {
        &self.perm
    }

    /// Original indices within distance `r`, ascending.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, r, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &[f64], r: f64) -> usize {
        let mut c = 0;
        self.for_each_within(q, r, |_, _| c += 1);
        c
    }

    /// The `k` nearest points as `(original_index, distance)`, ordered by
    /// distance then index, skipping `exclude`.
    pub fn knn(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        // Max-heap of the best k (squared distance, index) pairs.
        let mut best: BinaryHeap<(OrdF64, usize)> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let gap = self.box_gap2(node, q);
            if best.len() == k && gap > best.peek().expect("nonempty").0 .0 {
                continue;
            }
            if node.left == usize::MAX {
                for pos in node.start..node.end {
                    let i = self.perm[pos];
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = (OrdF64(self.metric.dist2(q, &self.pts[pos * self.dim..(pos + 1) * self.dim])), i);
                    if best.len() < k {
                        best.push(cand);
                    } else if cand < *best.peek().expect("nonempty") {
                        best.pop();
                        best.push(cand);
                    }
                }
            } else {
                // Visit the nearer child first.
                let gl = self.box_gap2(&self.nodes[node.left], q);
                let gr = self.box_gap2(&self.nodes[node.right], q);
                if gl <= gr {
                    stack.push(node.right);
                    stack.push(node.left);
                } else {
                    stack.push(node.left);
                    stack.push(node.right);
                }
            }
        }
        best.into_sorted_vec().into_iter().map(|(d, i)| (i, d.0.sqrt())).collect()
    }

    /// Distances to the `k` nearest points, ascending, skipping `exclude`.
    pub fn knn_distances(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<f64> {
        self.knn(q, k, exclude).into_iter().map(|(_, d)| d).collect()
    }

    /// Nearest point `(original_index, distance)`, skipping `exclude`.
    pub fn nearest(&self, q: &[f64], exclude: Option<usize>) -> Option<(usize, f64)> {
        self.knn(q, 1, exclude).into_iter().next()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn build(coords: &[f64], dim: usize, perm: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &perm[start..end] {
        for a in 0..dim {
            let v = coords[i * dim + a];
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    let id = nodes.len();
    nodes.push(Node { lo: lo.clone(), hi: hi.clone(), start, end, left: usize::MAX, right: usize::MAX });
    if end - start <= LEAF {
        return id;
    }
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .expect("dim > 0");
    if hi[axis] == lo[axis] {
        // All points coincide.
        return id;
    }
    let mid = (start + end) / 2;
    perm[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
        coords[i * dim + axis].total_cmp(&coords[j * dim + axis]).then(i.cmp(&j))
    });
    let left = build(coords, dim, perm, start, mid, nodes);
    let right = build(coords, dim, perm, mid, end, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn matches_brute_force_on_circle_metric() {
        let mut r = crate::rng::rng(1);
        let n = 700;
        let coords: Vec<f64> = (0..n)
            .flat_map(|_| [r.random::<f64>() * std::f64::consts::TAU, r.random::<f64>(), r.random::<f64>()])
            .collect();
        let idx = NeighborIndex::new(&coords, 3, Metric::AngularFirst);
        for qi in (0..n).step_by(37) {
            let q = &coords[qi * 3..qi * 3 + 3];
            for rad in [0.01, 0.1, 0.4, 1.0, 4.0] {
                let brute: Vec<usize> =
                    (0..n).filter(|&j| Metric::AngularFirst.dist2(q, &coords[j * 3..j * 3 + 3]) <= rad * rad).collect();
                assert_eq!(idx.within(q, rad), brute);
            }
            let mut d: Vec<f64> =
                (0..n).filter(|&j| j != qi).map(|j| Metric::AngularFirst.dist(q, &coords[j * 3..j * 3 + 3])).collect();
            d.sort_by(f64::total_cmp);
            assert_eq!(idx.knn_distances(q, 5, Some(qi)), d[..5].to_vec());
        }
    }

    #[test]
    fn duplicate_points() {
        let coords = vec![0.5; 2 * 100];
        let idx = NeighborIndex::new(&coords, 2, Metric::Euclidean);
        assert_eq!(idx.count_within(&[0.5, 0.5], 0.0), 100);
        assert_eq!(idx.count_within(&[0.6, 0.5], 0.05), 0);
    }
}
