//! Bottom-up construction of the tree, one energy ring at a time.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{argmin_state, LandscapeTree, Node, NodeKind};
use crate::error::{Error, Result};
use crate::index::{KdTree, SegIndex};
use crate::metric::SpaceKind;
use crate::model::{assign_level_sets, EnergyGrid, Sample, State};
use crate::par::Exec;
use crate::ringcluster::{partition_ring, ClusterParams, Points};
use crate::slc::UnionFind;
use crate::EnergyFn;

#[derive(Clone, Copy)]
pub struct BupOptions<'a> {
    pub params: &'a ClusterParams,
    pub exec: Exec,
    /// Energy function for interpolation rescue.
    pub energy: Option<&'a dyn EnergyFn>,
    /// Smallest connection threshold; `None` picks 1 for segmentations (the
    /// neighbor distance) and 0 for continuous spaces.
    pub min_link: Option<f64>,
}

impl<'a> BupOptions<'a> {
    pub fn new(params: &'a ClusterParams) -> Self {
        BupOptions { params, exec: Exec::default(), energy: None, min_link: None }
    }
}

/// Per-ring diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSummary {
    pub ring: usize,
    pub samples: usize,
    pub clusters: usize,
    pub k_low: usize,
    pub k_high: usize,
    pub upper: usize,
    pub rescued: usize,
    pub small: bool,
    pub new_leaves: usize,
    pub new_barriers: usize,
}

#[derive(Clone, Debug)]
pub struct Bup {
    pub tree: LandscapeTree,
    pub rings: Vec<RingSummary>,
}

/// Searchable copy of the states one sublevel cluster gained in one ring.
#[derive(Clone, Debug)]
pub enum SliceIndex {
    Continuous { tree: KdTree, lo: Vec<f64>, hi: Vec<f64> },
    Discrete(SegIndex),
}

fn bounding_box<'a>(dim: usize, pts: impl Iterator<Item = &'a [f64]>) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
    for p in pts {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Lower bound on the distance from `q` to the box, slightly shrunk so
/// rounding never prunes a true hit.
fn box_gap(q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..q.len() {
        let d = (lo[k] - q[k]).max(q[k] - hi[k]).max(0.0);
        s += d * d;
    }
    s.sqrt() * (1.0 - 1e-9)
}

fn boxes_gap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..alo.len() {
        let d = (blo[k] - ahi[k]).max(alo[k] - bhi[k]).max(0.0);
        s += d * d;
    }
    s.sqrt() * (1.0 - 1e-9)
}

impl SliceIndex {
    pub fn build(points: &Points<'_>) -> Self {
        match points {
            Points::Continuous(v) => {
                let dim = v.first().map_or(0, |x| x.len());
                let (lo, hi) = bounding_box(dim, v.iter().copied());
                SliceIndex::Continuous { tree: KdTree::new(dim, v.iter().copied()), lo, hi }
            }
            Points::Discrete(v) => {
                let len = v.first().map_or(0, |s| s.len);
                SliceIndex::Discrete(SegIndex::new(len, v.iter().map(|s| &s.cps[..])))
            }
        }
    }

    /// True iff some state of `query` lies within `t` of the slice.
    pub fn any_within(&self, query: &Points<'_>, t: f64) -> bool {
        match (self, query) {
            (SliceIndex::Continuous { tree, lo, hi }, Points::Continuous(q)) => {
                let dim = lo.len();
                let (qlo, qhi) = bounding_box(dim, q.iter().copied());
                if boxes_gap(&qlo, &qhi, lo, hi) > t {
                    return false;
                }
                q.iter().any(|x| box_gap(x, lo, hi) <= t && tree.any_within(x, t))
            }
            (SliceIndex::Discrete(idx), Points::Discrete(q)) => {
                let t = if t.is_finite() { t.floor().max(0.0).min(u32::MAX as f64) as u32 } else { u32::MAX };
                q.iter().any(|s| idx.any_within(&s.cps, t))
            }
            _ => false,
        }
    }
}

/// Whether a ring cluster connects to a sublevel cluster stored as slices
/// in ascending ring order. Slices are scanned from the highest ring down
/// and the scan stops at the first slice within `threshold`.
pub fn connect_descending(query: &Points<'_>, slices: &[&SliceIndex], threshold: f64) -> bool {
    slices.iter().rev().any(|s| s.any_within(query, threshold))
}

fn unique_points<'a>(samples: &'a [Sample], items: &[usize]) -> Points<'a> {
    match &samples[items[0]].state {
        State::Continuous(_) => {
            let mut seen = HashSet::with_capacity(items.len());
            let pts = items
                .iter()
                .filter_map(|&i| {
                    let x = samples[i].state.coords().expect("uniform state kind");
                    let key: Vec<u64> = x.iter().map(|c| (c + 0.0).to_bits()).collect();
                    seen.insert(key).then_some(x)
                })
                .collect();
            Points::Continuous(pts)
        }
        State::Discrete(_) => {
            let mut seen = HashSet::with_capacity(items.len());
            let segs = items
                .iter()
                .filter_map(|&i| {
                    let s = samples[i].state.segmentation().expect("uniform state kind");
                    seen.insert(&s.cps).then_some(s)
                })
                .collect();
            Points::Discrete(segs)
        }
    }
}

fn ring_points<'a>(samples: &'a [Sample], items: &[usize]) -> Points<'a> {
    match &samples[items[0]].state {
        State::Continuous(_) => {
            Points::Continuous(items.iter().map(|&i| samples[i].state.coords().expect("uniform state kind")).collect())
        }
        State::Discrete(_) => Points::Discrete(
            items.iter().map(|&i| samples[i].state.segmentation().expect("uniform state kind")).collect(),
        ),
    }
}

fn check_states(samples: &[Sample], space: &SpaceKind) -> Result<()> {
    for s in samples {
        match (&s.state, space) {
            (State::Continuous(x), SpaceKind::Continuous { lo, .. }) => {
                if x.len() != lo.len() {
                    return Err(Error::DimensionMismatch(x.len(), lo.len()));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite coordinate".into()));
                }
            }
            (State::Discrete(z), SpaceKind::Segmentation { len, .. }) => {
                if z.len != *len {
                    return Err(Error::LengthMismatch(z.len, *len));
                }
            }
            _ => return Err(Error::MixedStates),
        }
    }
    Ok(())
}

struct Sub {
    node: usize,
    d: f64,
    slices: Vec<usize>,
}

struct Building {
    nodes: Vec<Node>,
    counts: Vec<Vec<(usize, usize)>>,
}

impl Building {
    fn push(&mut self, kind: NodeKind, energy: f64, ring: usize, rep: Option<State>, children: Vec<usize>) -> usize {
        let id = self.nodes.len();
        for &c in &children {
            self.nodes[c].parent = Some(id);
            self.nodes[c].ring_span[1] = ring - 1;
        }
        self.nodes.push(Node {
            id,
            kind,
            energy,
            children,
            rep_state: rep,
            member_count: 0,
            mass: None,
            masses: Vec::new(),
            parent: None,
            ring_span: [ring, ring],
            ring_counts: Vec::new(),
            local_dos: None,
            members: Vec::new(),
        });
        self.counts.push(Vec::new());
        id
    }
}

/// Builds the tree of sublevel sets from `samples` partitioned by `grid`.
pub fn bup_build(samples: &[Sample], grid: &EnergyGrid, space: &SpaceKind, opts: &BupOptions<'_>) -> Result<Bup> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    opts.params.validate()?;
    check_states(samples, space)?;
    let rings = assign_level_sets(samples, grid)?;
    let levels = grid.levels();
    let mut by_ring: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for (i, &m) in rings.iter().enumerate() {
        by_ring[m].push(i);
    }
    let min_link = opts.min_link.unwrap_or(if space.is_discrete() { 1.0 } else { 0.0 });
    let rescue = if space.is_discrete() { None } else { opts.energy };

    let mut b = Building { nodes: Vec::new(), counts: Vec::new() };
    let mut slices: Vec<SliceIndex> = Vec::new();
    let mut subs: Vec<Sub> = Vec::new();
    let mut summaries = Vec::new();

    for (m, items) in by_ring.iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let outcome =
            partition_ring(&ring_points(samples, items), opts.params, subs.len(), rescue, grid.upper(m), opts.exec)?;
        let clusters: Vec<(Vec<usize>, f64)> =
            outcome.clusters.iter().map(|c| (c.members.iter().map(|&k| items[k]).collect(), c.max_nnd)).collect();
        let queries: Vec<Points<'_>> = clusters.iter().map(|(mem, _)| unique_points(samples, mem)).collect();

        let (nc, na) = (clusters.len(), subs.len());
        let pairs: Vec<(usize, usize)> = (0..nc).flat_map(|i| (0..na).map(move |j| (i, j))).collect();
        let linked = opts.exec.map(&pairs, |&(i, j)| {
            let t = clusters[i].1.max(subs[j].d).max(min_link);
            let s: Vec<&SliceIndex> = subs[j].slices.iter().map(|&k| &slices[k]).collect();
            connect_descending(&queries[i], &s, t)
        });
        let mut uf = UnionFind::new(nc + na);
        for (&(i, j), &ok) in pairs.iter().zip(&linked) {
            if ok {
                uf.union(i, nc + j);
            }
        }
        let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut slot = vec![usize::MAX; nc + na];
        for x in 0..nc + na {
            let r = uf.find(x);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push((Vec::new(), Vec::new()));
            }
            let g = &mut groups[slot[r]];
            if x < nc {
                g.0.push(x);
            } else {
                g.1.push(x - nc);
            }
        }

        let (mut new_leaves, mut new_barriers) = (0, 0);
        let mut next: Vec<Sub> = Vec::with_capacity(groups.len());
        let mut old: Vec<Option<Sub>> = subs.drain(..).map(Some).collect();
        for (ring_parts, sub_parts) in groups {
            let mut members: Vec<usize> = ring_parts.iter().flat_map(|&i| clusters[i].0.iter().copied()).collect();
            members.sort_unstable();
            let mut d = ring_parts.iter().map(|&i| clusters[i].1).fold(0.0, f64::max);
            let mut merged_slices = Vec::new();
            let mut child_nodes = Vec::new();
            for &j in &sub_parts {
                let s = old[j].take().expect("each sublevel cluster joins one group");
                d = d.max(s.d);
                merged_slices.extend(s.slices);
                child_nodes.push(s.node);
            }
            let node = match child_nodes.len() {
                0 => {
                    let best = argmin_state(samples, &members).expect("ring clusters are nonempty");
                    new_leaves += 1;
                    b.push(NodeKind::Leaf, best.energy, m, Some(best.state.clone()), Vec::new())
                }
                1 => child_nodes[0],
                _ => {
                    new_barriers += 1;
                    b.push(NodeKind::Barrier, grid.midpoint(m), m, None, child_nodes)
                }
            };
            if !members.is_empty() {
                merged_slices.sort_unstable();
                merged_slices.push(slices.len());
                slices.push(SliceIndex::build(&unique_points(samples, &members)));
                b.counts[node].push((m, members.len()));
                b.nodes[node].members.extend(members);
            }
            next.push(Sub { node, d, slices: merged_slices });
        }
        subs = next;
        summaries.push(RingSummary {
            ring: m,
            samples: items.len(),
            clusters: nc,
            k_low: outcome.k_low,
            k_high: outcome.k_high,
            upper: outcome.upper,
            rescued: outcome.rescued,
            small: outcome.small,
            new_leaves,
            new_barriers,
        });
    }

    let last = levels - 1;
    let roots: Vec<usize> = subs.iter().map(|s| s.node).collect();
    for &r in &roots {
        b.nodes[r].ring_span[1] = last;
    }
    let Building { mut nodes, counts } = b;
    for (node, recorded) in nodes.iter_mut().zip(counts) {
        let [lo, hi] = node.ring_span;
        let mut rc = vec![0usize; hi - lo + 1];
        for (m, c) in recorded {
            rc[m - lo] += c;
        }
        node.ring_counts = rc;
    }
    let mut tree = LandscapeTree { roots, nodes, grid: Some(grid.clone()), dos: None };
    for id in 0..tree.nodes.len() {
        let count = tree.subtree(id).iter().map(|&n| tree.nodes[n].members.len()).sum();
        tree.nodes[id].member_count = count;
    }
    Ok(Bup { tree, rings: summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_energy_grid, GridStrategy};

    fn line_samples(xs: &[f64], h: impl Fn(f64) -> f64) -> Vec<Sample> {
        xs.iter()
            .map(|&x| Sample {
                chain_id: 0,
                temperature: 1.0,
                truncation: None,
                energy: h(x),
                state: State::Continuous(vec![x]),
            })
            .collect()
    }

    #[test]
    fn rule_application() {
        let pts = [[0.0f64], [0.15]];
        let slice = SliceIndex::build(&Points::Continuous(vec![&pts[1][..]]));
        let q = Points::Continuous(vec![&pts[0][..]]);
        assert!(connect_descending(&q, &[&slice], 0.2f64.max(0.1)));
        let far = [[0.3f64]];
        let slice = SliceIndex::build(&Points::Continuous(vec![&far[0][..]]));
        assert!(!connect_descending(&q, &[&slice], 0.2f64.max(0.1)));
    }

    #[test]
    fn double_well_grid() {
        let xs: Vec<f64> = (0..=40_000).map(|i| -2.0 + 4.0 * i as f64 / 40_000.0).collect();
        let h = |x: f64| (x * x - 1.0).powi(2);
        let samples = line_samples(&xs, h);
        let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
        let grid = build_energy_grid(&energies, 20, GridStrategy::EqualCount).unwrap();
        let space = SpaceKind::cube(1, -2.0, 2.0).unwrap();
        let params = ClusterParams::default();
        let out = bup_build(&samples, &grid, &space, &BupOptions::new(&params)).unwrap();
        let t = &out.tree;
        t.validate().unwrap();
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.roots.len(), 1);
        let root = t.node(t.roots[0]);
        let m = grid.ring_of(1.0).unwrap();
        assert!((root.energy - 1.0).abs() <= grid.width(m), "{}", root.energy);
        for leaf in t.leaves() {
            assert!(leaf.energy < 1e-6);
        }
        let total: usize = t.nodes.iter().map(|n| n.ring_counts.iter().sum::<usize>()).sum();
        assert_eq!(total, samples.len());
        assert_eq!(root.member_count, samples.len());
    }

    #[test]
    fn bowl_is_one_leaf() {
        let xs: Vec<f64> = (0..=20_000).map(|i| -1.0 + 2.0 * i as f64 / 20_000.0).collect();
        let samples = line_samples(&xs, |x| x * x);
        let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
        let grid = build_energy_grid(&energies, 10, GridStrategy::EqualCount).unwrap();
        let space = SpaceKind::cube(1, -1.0, 1.0).unwrap();
        let params = ClusterParams::default();
        let t = bup_build(&samples, &grid, &space, &BupOptions::new(&params)).unwrap().tree;
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn empty_input_errors() {
        let grid = EnergyGrid::new(vec![1.0], 0.0).unwrap();
        let space = SpaceKind::cube(1, -1.0, 1.0).unwrap();
        let params = ClusterParams::default();
        assert!(bup_build(&[], &grid, &space, &BupOptions::new(&params)).is_err());
    }
}
