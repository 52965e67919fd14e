//! Comparing two trees of sublevel sets.
//!
//! Leaves are paired first (by representative state), then every barrier
//! is identified by the set of paired leaves below it. Two trees have the
//! same topology when these leaf sets coincide.

use std::collections::{BTreeMap, BTreeSet};

use super::LandscapeTree;
use crate::metric::state_distance;
use crate::model::State;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeDiff {
    pub same_topology: bool,
    /// Largest |energy difference| over paired leaves.
    pub leaf_energy_gap: f64,
    /// Largest |energy difference| over paired barriers.
    pub barrier_energy_gap: f64,
    pub unmatched_leaves: usize,
}

/// Pairs the leaves of `a` with leaves of `b` greedily by representative
/// distance (closest pairs first). Returns `(leaf of a, leaf of b)` pairs.
pub fn match_leaves(a: &LandscapeTree, b: &LandscapeTree) -> Vec<(usize, usize)> {
    let la: Vec<(usize, &State)> = a.leaves().filter_map(|n| n.rep_state.as_ref().map(|s| (n.id, s))).collect();
    let lb: Vec<(usize, &State)> = b.leaves().filter_map(|n| n.rep_state.as_ref().map(|s| (n.id, s))).collect();
    let mut cand = Vec::with_capacity(la.len() * lb.len());
    for (i, (_, sa)) in la.iter().enumerate() {
        for (j, (_, sb)) in lb.iter().enumerate() {
            if let Ok(d) = state_distance(sa, sb) {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut used_a, mut used_b) = (vec![false; la.len()], vec![false; lb.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((la[i].0, lb[j].0));
        }
    }
    out.sort_unstable();
    out
}

/// Barrier energies keyed by the set of leaves below them, with leaves
/// relabeled through `label`.
fn clades(t: &LandscapeTree, label: &BTreeMap<usize, usize>) -> BTreeMap<BTreeSet<usize>, Vec<f64>> {
    let mut out: BTreeMap<BTreeSet<usize>, Vec<f64>> = BTreeMap::new();
    for n in t.barriers() {
        let key: BTreeSet<usize> = t.leaves_under(n.id).iter().filter_map(|l| label.get(l).copied()).collect();
        out.entry(key).or_default().push(n.energy);
    }
    for v in out.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    out
}

fn roots(t: &LandscapeTree, label: &BTreeMap<usize, usize>) -> BTreeSet<BTreeSet<usize>> {
    t.roots.iter().map(|&r| t.leaves_under(r).iter().filter_map(|l| label.get(l).copied()).collect()).collect()
}

/// Compares `a` and `b` under the given leaf pairing.
pub fn compare_with(a: &LandscapeTree, b: &LandscapeTree, pairs: &[(usize, usize)]) -> TreeDiff {
    let la: BTreeMap<usize, usize> = pairs.iter().enumerate().map(|(k, &(x, _))| (x, k)).collect();
    let lb: BTreeMap<usize, usize> = pairs.iter().enumerate().map(|(k, &(_, y))| (y, k)).collect();
    let unmatched = a.leaf_count() + b.leaf_count() - 2 * pairs.len();
    let leaf_gap = pairs.iter().map(|&(x, y)| (a.nodes[x].energy - b.nodes[y].energy).abs()).fold(0.0, f64::max);
    let (ca, cb) = (clades(a, &la), clades(b, &lb));
    let same_shape =
        ca.len() == cb.len() && ca.iter().zip(&cb).all(|((ka, va), (kb, vb))| ka == kb && va.len() == vb.len());
    let barrier_gap = if same_shape {
        ca.values()
            .zip(cb.values())
            .flat_map(|(va, vb)| va.iter().zip(vb).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    TreeDiff {
        same_topology: unmatched == 0 && same_shape && roots(a, &la) == roots(b, &lb),
        leaf_energy_gap: leaf_gap,
        barrier_energy_gap: barrier_gap,
        unmatched_leaves: unmatched,
    }
}

/// Compares `a` and `b` after pairing leaves by representative state.
pub fn compare_trees(a: &LandscapeTree, b: &LandscapeTree) -> TreeDiff {
    compare_with(a, b, &match_leaves(a, b))
}
