//! Single-linkage clustering through the minimum spanning tree.
//!
//! The dendrogram is built in two passes: Prim's algorithm over the implicit
//! complete graph (O(n^2) distance calls, O(n) memory), then Kruskal-style
//! contraction of the tree edges in ascending `(weight, i, j)` order. Merge
//! ids follow the usual convention: items are `0..n`, merge `k` creates
//! cluster `n + k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

const PRIM_CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Items realizing `height`, smaller index first.
    pub pair: (usize, usize),
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// One cluster of a ring: indices into the ring's item list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub max_nnd: f64,
}

/// Clusters of one energy ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingPartition {
    pub ring: usize,
    pub clusters: Vec<Cluster>,
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; returns the new root, or `None` if
    /// they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

#[derive(Clone, Copy)]
struct Frontier {
    item: usize,
    dist: f64,
    from: usize,
}

#[inline]
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Minimum spanning tree edges `(i, j, w)` with `i < j`, in Prim order.
pub fn minimum_spanning_tree<D>(n: usize, dist: D, exec: Exec) -> Vec<(usize, usize, f64)>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    if n <= 1 {
        return Vec::new();
    }
    let mut frontier: Vec<Frontier> = (1..n).map(|j| Frontier { item: j, dist: f64::INFINITY, from: 0 }).collect();
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    while !frontier.is_empty() {
        let update = |_: usize, chunk: &mut [Frontier]| {
            let mut best: Option<(f64, usize, usize)> = None;
            for (k, f) in chunk.iter_mut().enumerate() {
                let d = dist(current, f.item);
                if better((d, current), (f.dist, f.from)) {
                    f.dist = d;
                    f.from = current;
                }
                if best.is_none_or(|b| better((f.dist, f.item), (b.0, b.1))) {
                    best = Some((f.dist, f.item, k));
                }
            }
            best
        };
        let chunk = if exec.is_parallel() { PRIM_CHUNK } else { usize::MAX };
        let locals = exec.map_chunks_mut(&mut frontier, chunk, update);
        let mut pick: Option<(f64, usize, usize)> = None;
        for (c, local) in locals.into_iter().enumerate() {
            if let Some((d, item, k)) = local {
                let at = if chunk == usize::MAX { k } else { c * chunk + k };
                if pick.is_none_or(|b| better((d, item), (b.0, b.1))) {
                    pick = Some((d, item, at));
                }
            }
        }
        let (d, item, at) = pick.expect("frontier is nonempty");
        let from = frontier[at].from;
        edges.push((from.min(item), from.max(item), d));
        frontier.swap_remove(at);
        current = item;
    }
    edges
}

/// Single-linkage dendrogram of `n` items under `dist`.
pub fn single_linkage<D>(n: usize, dist: D, exec: Exec) -> Dendrogram
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    let mut edges = minimum_spanning_tree(n, dist, exec);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut uf = UnionFind::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (i, j, w) in edges {
        let (ri, rj) = (uf.find(i), uf.find(j));
        let (a, b) = (label[ri], label[rj]);
        let root = uf.union(ri, rj).expect("tree edges join distinct components");
        label[root] = n + merges.len();
        merges.push(Merge { left: a.min(b), right: a.max(b), height: w, pair: (i, j), size: uf.set_size(root) });
    }
    Dendrogram { n, merges }
}

impl Dendrogram {
    /// Merge heights in merge order (non-decreasing).
    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    pub fn cluster_size(&self, id: usize) -> usize {
        if id < self.n {
            1
        } else {
            self.merges[id - self.n].size
        }
    }

    /// Items under dendrogram node `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cluster_size(id));
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            if c < self.n {
                out.push(c);
            } else {
                let m = &self.merges[c - self.n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out.sort_unstable();
        out
    }

    /// Clusters left after undoing the last `k - 1` merges.
    pub fn cut(&self, k: usize) -> Result<Vec<Cluster>> {
        if k == 0 || k > self.n.max(1) {
            return Err(Error::InvalidArgument(format!("cut into {k} clusters of {} items", self.n)));
        }
        let kept = vec![true; self.merges.len() + 1 - k];
        Ok(self.components(|idx| idx < kept.len()))
    }

    /// Connected components when only merges with `keep(index)` are applied.
    /// Each cluster's `max_nnd` is its largest kept merge height.
    pub fn components<F: Fn(usize) -> bool>(&self, keep: F) -> Vec<Cluster> {
        let n = self.n;
        let mut uf = UnionFind::new(n);
        let mut height = vec![0.0f64; n];
        for (idx, m) in self.merges.iter().enumerate() {
            if keep(idx) {
                let (a, b) = m.pair;
                let root = uf.union(a, b).expect("merges join distinct components");
                height[root] = height[root].max(m.height);
            }
        }
        let mut slot = vec![usize::MAX; n];
        let mut clusters: Vec<Cluster> = Vec::new();
        for i in 0..n {
            let r = uf.find(i);
            if slot[r] == usize::MAX {
                slot[r] = clusters.len();
                clusters.push(Cluster { members: Vec::new(), max_nnd: 0.0 });
            }
            clusters[slot[r]].members.push(i);
        }
        for i in 0..n {
            let r = uf.find(i);
            let c = &mut clusters[slot[r]];
            c.max_nnd = c.max_nnd.max(height[r]);
        }
        clusters
    }
}

/// Smallest cross distance between `a` and `b` and the pair realizing it.
/// Ties go to the lexicographically smallest `(a_index, b_index)` pair.
pub fn set_to_set_nnd<D>(a: &[usize], b: &[usize], dist: D) -> Result<(f64, (usize, usize))>
where
    D: Fn(usize, usize) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("set for nearest-neighbor distance"));
    }
    let mut best = (f64::INFINITY, (usize::MAX, usize::MAX));
    for &i in a {
        for &j in b {
            let d = dist(i, j);
            if d < best.0 || (d == best.0 && (i, j) < best.1) {
                best = (d, (i, j));
            }
        }
    }
    Ok(best)
}
