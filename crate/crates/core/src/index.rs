//! Exact range-existence queries used when ring clusters are connected to
//! sublevel clusters: "is any stored state within distance `t` of `q`?".
//!
//! Both indexes return exactly what a full scan with the same distance
//! function would return; they only skip candidates that provably exceed
//! the threshold.

use crate::metric::{euclidean, seg_distance};

const LEAF: usize = 16;

#[derive(Clone, Debug)]
struct KdNode {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Static k-d tree over a point set.
#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    nodes: Vec<KdNode>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl KdTree {
    pub fn new<'a, I>(dim: usize, points: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut coords = Vec::new();
        for p in points {
            debug_assert_eq!(p.len(), dim);
            coords.extend_from_slice(p);
        }
        let n = coords.len().checked_div(dim).unwrap_or(0);
        let mut tree =
            KdTree { dim, coords: Vec::with_capacity(coords.len()), nodes: Vec::new(), lo: Vec::new(), hi: Vec::new() };
        let mut order: Vec<usize> = (0..n).collect();
        if n > 0 {
            tree.build(&coords, &mut order, 0, n);
        }
        for &i in &order {
            tree.coords.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn build(&mut self, coords: &[f64], order: &mut [usize], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let id = self.nodes.len();
        self.nodes.push(KdNode { start, end, children: None });
        let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
        for &i in &order[start..end] {
            for k in 0..dim {
                let v = coords[i * dim + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let axis = (0..dim).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
        let spread = hi[axis] - lo[axis];
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if end - start > LEAF && spread > 0.0 {
            let mid = start + (end - start) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                coords[a * dim + axis].total_cmp(&coords[b * dim + axis])
            });
            let l = self.build(coords, order, start, mid);
            let r = self.build(coords, order, mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    fn box_sq(&self, node: usize, q: &[f64]) -> f64 {
        let (lo, hi) = (&self.lo[node * self.dim..], &self.hi[node * self.dim..]);
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = if q[k] < lo[k] {
                lo[k] - q[k]
            } else if q[k] > hi[k] {
                q[k] - hi[k]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    /// True iff some stored point `x` has `euclidean(q, x) <= t`.
    pub fn any_within(&self, q: &[f64], t: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        // slack keeps pruning conservative under rounding
        let limit = t * t * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if self.box_sq(id, q) > limit {
                continue;
            }
            let node = &self.nodes[id];
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for i in node.start..node.end {
                        if euclidean(q, &self.coords[i * self.dim..(i + 1) * self.dim]) <= t {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Segmentations of a common length indexed by change-point position.
#[derive(Clone, Debug)]
pub struct SegIndex {
    len: u32,
    states: Vec<Vec<u32>>,
    /// `offsets[z]..offsets[z + 1]` indexes `owners` for position `z`.
    offsets: Vec<usize>,
    owners: Vec<u32>,
}

impl SegIndex {
    pub fn new<'a, I>(len: u32, states: I) -> Self
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        let states: Vec<Vec<u32>> = states.into_iter().map(<[u32]>::to_vec).collect();
        let slots = len as usize + 2;
        let mut counts = vec![0usize; slots + 1];
        for s in &states {
            for &z in s {
                counts[z as usize + 1] += 1;
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut owners = vec![0u32; *offsets.last().unwrap()];
        for (id, s) in states.iter().enumerate() {
            for &z in s {
                owners[fill[z as usize]] = id as u32;
                fill[z as usize] += 1;
            }
        }
        SegIndex { len, states, offsets, owners }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn window(&self, lo: u32, hi: u32) -> std::ops::Range<usize> {
        let lo = lo.max(2) as usize;
        let hi = hi.min(self.len) as usize;
        if lo > hi {
            return 0..0;
        }
        self.offsets[lo]..self.offsets[hi + 1]
    }

    /// True iff some stored segmentation is within distance `t` of `q`.
    pub fn any_within(&self, q: &[u32], t: u32) -> bool {
        if self.states.is_empty() {
            return false;
        }
        let p = q.len();
        let bound = |k: usize| -> u32 {
            if k == 0 {
                1
            } else if k > p {
                self.len + 1
            } else {
                q[k - 1]
            }
        };
        // A change point of q whose two adjacent segments are longer than t
        // forces every state within t to have a change point in [z-t, z+t].
        let mut best: Option<std::ops::Range<usize>> = None;
        for k in 1..=p {
            let z = q[k - 1];
            if z - bound(k - 1) > t && bound(k + 1) - z > t {
                let w = self.window(z.saturating_sub(t), z + t);
                if best.as_ref().is_none_or(|b| w.len() < b.len()) {
                    best = Some(w);
                }
            }
        }
        let close = |s: &[u32]| s.len().abs_diff(p) as u32 <= t && seg_distance(q, s, self.len) <= t;
        match best {
            Some(range) => {
                let mut seen: Vec<u32> = self.owners[range].to_vec();
                seen.sort_unstable();
                seen.dedup();
                seen.into_iter().any(|id| close(&self.states[id as usize]))
            }
            None => self.states.iter().any(|s| close(s)),
        }
    }
}
