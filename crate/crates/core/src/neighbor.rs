//! Exact k-nearest-site queries over a site set.
//!
//! A balanced k-d tree is rebuilt from scratch whenever the sites move;
//! build is O(N log^2 N) (sort per level), queries O(k log N) on typical
//! inputs, and results are exact: ties in Euclidean distance resolve to the
//! lower site index, and returned lists are sorted ascending by index so
//! downstream accumulation order is reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::SVector;

use crate::scalar::Real;
use crate::voronoi::SiteSet;

#[derive(Debug, Clone)]
struct Node<R: Real> {
    point: u32,
    axis: u8,
    split: R,
    left: i32,
    right: i32,
}

/// Spatial index over site positions (Euclidean metric; the per-site
/// anisotropic metrics deliberately play no role in neighbor selection).
#[derive(Debug, Clone)]
pub struct NeighborIndex<R: Real, const D: usize> {
    points: Vec<SVector<R, D>>,
    nodes: Vec<Node<R>>,
    root: i32,
    /// Caller-managed stamp tying the index to the site-set revision it was
    /// built from; purely diagnostic.
    pub generation: u64,
}

/// Max-heap entry ordered by (squared distance, site index): the "worst"
/// candidate is the farthest, with the higher index losing ties.
struct Cand<R: Real>(R, u32);

impl<R: Real> PartialEq for Cand<R> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<R: Real> Eq for Cand<R> {}
impl<R: Real> PartialOrd for Cand<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<R: Real> Ord for Cand<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distances are finite by SiteSet's construction invariant.
        self.0
            .partial_cmp(&other.0)
            .expect("finite distances")
            .then(self.1.cmp(&other.1))
    }
}

impl<R: Real, const D: usize> NeighborIndex<R, D> {
    pub fn build(sites: &SiteSet<R, D>) -> Self {
        Self::build_with_generation(sites, 0)
    }

    pub fn build_with_generation(sites: &SiteSet<R, D>, generation: u64) -> Self {
        let points: Vec<SVector<R, D>> = sites.positions().to_vec();
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&mut ids, &points, &mut nodes);
        Self { points, nodes, root, generation }
    }

    // The outer range runs over axes, not over the points it indexes into.
    #[allow(clippy::needless_range_loop)]
    fn build_rec(ids: &mut [u32], points: &[SVector<R, D>], nodes: &mut Vec<Node<R>>) -> i32 {
        if ids.is_empty() {
            return -1;
        }
        // Split the axis of widest extent; degenerate (all-equal) extents
        // fall back to axis 0 and still terminate because the median point
        // is excluded from both halves.
        let mut axis = 0usize;
        let mut best_spread = R::zero();
        for a in 0..D {
            let mut lo = points[ids[0] as usize][a];
            let mut hi = lo;
            for &id in ids.iter().skip(1) {
                let v = points[id as usize][a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let spread = hi - lo;
            if spread > best_spread {
                best_spread = spread;
                axis = a;
            }
        }
        ids.sort_unstable_by(|&a, &b| {
            points[a as usize][axis]
                .partial_cmp(&points[b as usize][axis])
                .expect("finite coordinates")
                .then(a.cmp(&b))
        });
        let mid = ids.len() / 2;
        let point = ids[mid];
        let slot = nodes.len();
        nodes.push(Node {
            point,
            axis: axis as u8,
            split: points[point as usize][axis],
            left: -1,
            right: -1,
        });
        let (lo_half, rest) = ids.split_at_mut(mid);
        let hi_half = &mut rest[1..];
        let left = Self::build_rec(lo_half, points, nodes);
        let right = Self::build_rec(hi_half, points, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot as i32
    }

    pub fn site_count(&self) -> usize {
        self.points.len()
    }

    /// Indices of the `min(k, N)` nearest sites, sorted ascending by index.
    pub fn k_nearest(&self, point: &SVector<R, D>, k: usize) -> Vec<u32> {
        let mut out = Vec::new();
        self.k_nearest_into(point, k, &mut out);
        out
    }

    /// As [`NeighborIndex::k_nearest`], reusing the output buffer.
    pub fn k_nearest_into(&self, point: &SVector<R, D>, k: usize, out: &mut Vec<u32>) {
        out.clear();
        let k = k.min(self.points.len());
        if k == 0 {
            return;
        }
        let mut heap: BinaryHeap<Cand<R>> = BinaryHeap::with_capacity(k + 1);
        self.visit(self.root, point, k, &mut heap);
        out.extend(heap.into_iter().map(|c| c.1));
        out.sort_unstable();
    }

    fn visit(&self, node: i32, point: &SVector<R, D>, k: usize, heap: &mut BinaryHeap<Cand<R>>) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let d2 = (point - self.points[n.point as usize]).norm_squared();
        let cand = Cand(d2, n.point);
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("nonempty heap") {
            heap.pop();
            heap.push(cand);
        }

        let delta = point[n.axis as usize] - n.split;
        let (near, far) = if delta < R::zero() {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.visit(near, point, k, heap);
        // Non-strict: an equidistant point across the plane may still win a
        // tie on index, so the far side is pruned only when strictly worse.
        let worst = heap.peek().expect("nonempty heap").0;
        if heap.len() < k || delta * delta <= worst {
            self.visit(far, point, k, heap);
        }
    }
}
