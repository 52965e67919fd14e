//! Brute-force references: sublevel trees by flood fill on a raster or on
//! the full segmentation graph, the exact tempered posterior, and the
//! density of states by quadrature.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::landscape::{LandscapeTree, Node, NodeKind};
use crate::metric::neighbors_distance_one;
use crate::model::{DosEstimate, EnergyGrid, Segmentation, State};
use crate::samplers::dp::SegmentModel;
use crate::EnergyFn;

/// Largest state space the enumerating oracles accept.
pub const MAX_STATES: u64 = 1_000_000;

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn join(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.parent[hi] = lo;
        }
    }
}

/// Tree of sublevel sets of a graph with vertex energies, at the levels of
/// `grid`. Vertices at or above the top boundary are left out.
fn sublevel_tree(
    energy: &[f64],
    neighbors: &dyn Fn(usize, &mut Vec<usize>),
    state: &dyn Fn(usize) -> State,
    grid: &EnergyGrid,
) -> LandscapeTree {
    let n = energy.len();
    let levels = grid.levels();
    let mut by_ring: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for (v, &e) in energy.iter().enumerate() {
        if let Some(m) = grid.ring_of(e) {
            by_ring[m].push(v);
        }
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut counts: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut active = vec![false; n];
    let mut dsu = Dsu::new(n);
    // representative vertex of each live component, and its node
    let mut live: Vec<(usize, usize)> = Vec::new();
    let mut buf = Vec::new();
    for (m, ring) in by_ring.iter().enumerate() {
        if ring.is_empty() {
            continue;
        }
        for &v in ring {
            active[v] = true;
        }
        for &v in ring {
            buf.clear();
            neighbors(v, &mut buf);
            for &w in &buf {
                if active[w] {
                    dsu.join(v, w);
                }
            }
        }
        let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut group_of = |root: usize, groups: &mut Vec<(usize, Vec<usize>, Vec<usize>)>| {
            *slot.entry(root).or_insert_with(|| {
                groups.push((root, Vec::new(), Vec::new()));
                groups.len() - 1
            })
        };
        for &(rep, node) in &live {
            let g = group_of(dsu.find(rep), &mut groups);
            groups[g].1.push(node);
        }
        for &v in ring {
            let g = group_of(dsu.find(v), &mut groups);
            groups[g].2.push(v);
        }
        let mut next = Vec::with_capacity(groups.len());
        for (root, mut olds, fresh) in groups {
            olds.sort_unstable();
            let id = match olds.len() {
                1 => olds[0],
                k => {
                    let id = nodes.len();
                    let (kind, energy, rep) = if k == 0 {
                        let best = *fresh.iter().min_by(|&&a, &&b| energy[a].total_cmp(&energy[b])).expect("nonempty");
                        (NodeKind::Leaf, energy[best], Some(state(best)))
                    } else {
                        (NodeKind::Barrier, grid.midpoint(m), None)
                    };
                    for &c in &olds {
                        nodes[c].parent = Some(id);
                        nodes[c].ring_span[1] = m - 1;
                    }
                    nodes.push(Node {
                        id,
                        kind,
                        energy,
                        children: olds,
                        rep_state: rep,
                        member_count: 0,
                        mass: None,
                        masses: Vec::new(),
                        parent: None,
                        ring_span: [m, m],
                        ring_counts: Vec::new(),
                        local_dos: None,
                        members: Vec::new(),
                    });
                    counts.push(Vec::new());
                    id
                }
            };
            if !fresh.is_empty() {
                counts[id].push((m, fresh.len()));
                nodes[id].members.extend(fresh);
            }
            next.push((root, id));
        }
        live = next;
    }
    let roots: Vec<usize> = live.iter().map(|&(_, id)| id).collect();
    for &r in &roots {
        nodes[r].ring_span[1] = levels - 1;
    }
    for (node, recorded) in nodes.iter_mut().zip(counts) {
        let mut rc = vec![0usize; node.ring_span[1] - node.ring_span[0] + 1];
        for (m, c) in recorded {
            rc[m - node.ring_span[0]] += c;
        }
        node.ring_counts = rc;
        node.members.sort_unstable();
    }
    // children precede parents, so one forward pass accumulates domains
    for id in 0..nodes.len() {
        let below: usize = nodes[id].children.iter().map(|&c| nodes[c].member_count).sum();
        nodes[id].member_count = below + nodes[id].members.len();
    }
    LandscapeTree { roots, nodes, grid: Some(grid.clone()), dos: None }
}

/// Exact discretized tree of a 2-D energy on a `resolution x resolution`
/// raster of cell centers with 4-connectivity. Node members are cell
/// indices `row * resolution + col`.
pub fn grid_tree_oracle<E: EnergyFn + ?Sized>(
    energy: &E,
    lo: [f64; 2],
    hi: [f64; 2],
    resolution: usize,
    grid: &EnergyGrid,
    declared_minima: usize,
) -> Result<LandscapeTree> {
    if resolution < 2 || !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(Error::InvalidArgument("need resolution >= 2 and a nonempty box".into()));
    }
    let r = resolution;
    let center = move |v: usize| {
        let (i, j) = (v / r, v % r);
        [lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / r as f64, lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / r as f64]
    };
    let values: Vec<f64> = (0..r * r).map(|v| energy.energy(&center(v))).collect();
    let neighbors = move |v: usize, out: &mut Vec<usize>| {
        let (i, j) = (v / r, v % r);
        if i > 0 {
            out.push(v - r);
        }
        if i + 1 < r {
            out.push(v + r);
        }
        if j > 0 {
            out.push(v - 1);
        }
        if j + 1 < r {
            out.push(v + 1);
        }
    };
    let state = move |v: usize| State::Continuous(center(v).to_vec());
    let tree = sublevel_tree(&values, &neighbors, &state, grid);
    if tree.leaf_count() < declared_minima {
        log::warn!(
            "raster of {r}x{r} shows {} of {declared_minima} declared minima; refine the resolution",
            tree.leaf_count()
        );
    }
    Ok(tree)
}

fn state_count(len: u32, max_points: u32) -> u64 {
    let mut total = 1u64;
    let mut c = 1u64;
    for k in 1..=u64::from(max_points) {
        c = c.saturating_mul(u64::from(len) - k) / k;
        total = total.saturating_add(c);
    }
    total
}

/// Every segmentation of `1..=len` with at most `max_points` change points,
/// by count and then lexicographically.
pub fn enumerate_segmentations(len: u32, max_points: u32) -> Result<Vec<Segmentation>> {
    if len < 1 || max_points >= len {
        return Err(Error::InvalidArgument(format!("need 0 <= N < L, got N={max_points}, L={len}")));
    }
    let total = state_count(len, max_points);
    if total > MAX_STATES {
        return Err(Error::TooLarge(total));
    }
    let mut out = Vec::with_capacity(total as usize);
    for k in 0..=max_points as usize {
        let mut cps: Vec<u32> = (2..2 + k as u32).collect();
        loop {
            out.push(Segmentation { cps: cps.clone(), len, max_points });
            // advance to the next k-subset of 2..=len
            let mut i = k;
            while i > 0 && cps[i - 1] == len - (k - i) as u32 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            cps[i - 1] += 1;
            for j in i..k {
                cps[j] = cps[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Exact discretized tree over all segmentations, two states adjacent when
/// at distance one.
pub fn exhaustive_tree_oracle(model: &SegmentModel, grid: &EnergyGrid) -> Result<LandscapeTree> {
    let states = enumerate_segmentations(model.len(), model.max_points)?;
    let energies: Vec<f64> = states.iter().map(|z| model.energy_unchecked(&z.cps)).collect();
    let index: HashMap<&[u32], usize> = states.iter().enumerate().map(|(i, z)| (&z.cps[..], i)).collect();
    let neighbors = |v: usize, out: &mut Vec<usize>| {
        out.extend(neighbors_distance_one(&states[v]).iter().map(|x| index[&x.cps[..]]));
    };
    let state = |v: usize| State::Discrete(states[v].clone());
    Ok(sublevel_tree(&energies, &neighbors, &state, grid))
}

/// Tempered posterior `exp(-h/T) / Z` of every segmentation.
pub fn enumerate_posterior(model: &SegmentModel, temperature: f64) -> Result<Vec<(Segmentation, f64)>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
    }
    let states = enumerate_segmentations(model.len(), model.max_points)?;
    let logs: Vec<f64> = states.iter().map(|z| -model.energy_unchecked(&z.cps) / temperature).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(states.into_iter().zip(w).map(|(z, v)| (z, v / total)).collect())
}

/// Density of states of a 1-D energy on `[lo, hi]` at the rings of `grid`:
/// the measure of each ring's preimage from `cells` midpoint evaluations,
/// divided by the ring width and normalized to unit total.
pub fn quadrature_dos_1d<E: EnergyFn + ?Sized>(
    energy: &E,
    lo: f64,
    hi: f64,
    grid: &EnergyGrid,
    cells: usize,
) -> Result<DosEstimate> {
    if !(lo < hi) || cells == 0 {
        return Err(Error::InvalidArgument("need lo < hi and at least one cell".into()));
    }
    let dx = (hi - lo) / cells as f64;
    let levels = grid.levels();
    let mut measure = vec![0.0; levels];
    let mut total = 0.0;
    for i in 0..cells {
        let h = energy.energy(&[lo + (i as f64 + 0.5) * dx]);
        if let Some(m) = grid.ring_of(h) {
            measure[m] += dx;
            total += dx;
        }
    }
    if total == 0.0 {
        return Err(Error::Empty("grid covers no part of the domain"));
    }
    let widths: Vec<f64> = (0..levels).map(|m| grid.width(m)).collect();
    Ok(DosEstimate {
        midpoints: (0..levels).map(|m| grid.midpoint(m)).collect(),
        values: measure.iter().zip(&widths).map(|(v, w)| v / total / w).collect(),
        widths,
    })
}
