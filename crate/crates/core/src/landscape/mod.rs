//! The tree of sublevel sets and everything attached to it.
//!
//! [`bup_build`] assembles ring partitions into the tree; [`estimate_dos`]
//! estimates the density of states; [`local_dos`] and [`branch_mass`]
//! annotate branches with their share of it.

mod bup;
pub mod compare;
mod dos;
mod mass;
mod pipeline;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bup::{bup_build, connect_descending, Bup, BupOptions, RingSummary, SliceIndex};
pub use dos::{estimate_dos, ChainInfo, DosOptions};
pub use mass::{branch_mass, local_dos, segment_mass};
pub use pipeline::{reconstruct, reconstruct_on, Reconstruction, TreeConfig};

use crate::error::{Error, Result};
use crate::model::{DosEstimate, EnergyGrid, Sample, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Leaf,
    Barrier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mass {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub energy: f64,
    pub children: Vec<usize>,
    /// Lowest-energy member for leaves.
    pub rep_state: Option<State>,
    /// Samples in the node's domain: its own rings plus all descendants.
    pub member_count: usize,
    pub mass: Option<Mass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masses: Vec<Mass>,
    #[serde(default)]
    pub parent: Option<usize>,
    /// First and last ring owned by this node (below its parent's ring).
    #[serde(default)]
    pub ring_span: [usize; 2],
    /// Samples per owned ring, indexed from `ring_span[0]`.
    #[serde(default)]
    pub ring_counts: Vec<usize>,
    /// Local density of states per owned ring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_dos: Option<Vec<f64>>,
    /// Sample indices in the owned rings.
    #[serde(skip)]
    pub members: Vec<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }

    pub fn rings(&self) -> std::ops::RangeInclusive<usize> {
        self.ring_span[0]..=self.ring_span[1]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LandscapeTree {
    pub roots: Vec<usize>,
    pub nodes: Vec<Node>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<EnergyGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dos: Option<DosEstimate>,
}

impl LandscapeTree {
    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn barriers(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// `id` and all its descendants, parents before children.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    pub fn leaves_under(&self, id: usize) -> BTreeSet<usize> {
        self.subtree(id).into_iter().filter(|&n| self.nodes[n].is_leaf()).collect()
    }

    /// Sample indices in the domain of `id`.
    pub fn domain_members(&self, id: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.subtree(id).into_iter().flat_map(|n| self.nodes[n].members.iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Energy of the parent barrier, `+inf` for roots.
    pub fn parent_energy(&self, id: usize) -> f64 {
        self.nodes[id].parent.map_or(f64::INFINITY, |p| self.nodes[p].energy)
    }

    /// Nodes whose domains are the connected components of `{h < cut}`.
    pub fn components_at(&self, cut: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            if self.nodes[n].energy >= cut {
                stack.extend(self.nodes[n].children.iter().rev());
            } else {
                out.push(n);
            }
        }
        out
    }

    /// Structural invariants of a tree of sublevel sets.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad(format!("node {i} carries id {}", n.id));
            }
            match n.kind {
                NodeKind::Leaf if !n.children.is_empty() => return bad(format!("leaf {i} has children")),
                NodeKind::Barrier if n.children.len() < 2 => return bad(format!("barrier {i} has < 2 children")),
                _ => {}
            }
            for &c in &n.children {
                if self.nodes[c].parent != Some(i) {
                    return bad(format!("child {c} of {i} does not point back"));
                }
                if self.nodes[c].energy >= n.energy {
                    return bad(format!("child {c} of {i} is not below its parent"));
                }
                if self.nodes[c].ring_span[1] >= n.ring_span[0] {
                    return bad(format!("child {c} of {i} owns rings at or above its parent"));
                }
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        for &r in &self.roots {
            if self.nodes[r].parent.is_some() {
                return bad(format!("root {r} has a parent"));
            }
            for n in self.subtree(r) {
                if std::mem::replace(&mut seen[n], true) {
                    return bad(format!("node {n} reachable twice"));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("nodes unreachable from the roots".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tree: LandscapeTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Graphviz text with one digraph per root.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        for (k, &root) in self.roots.iter().enumerate() {
            let _ = writeln!(out, "digraph landscape_{k} {{");
            let _ = writeln!(out, "  node [fontsize=10];");
            for id in self.subtree(root) {
                let n = &self.nodes[id];
                match n.kind {
                    NodeKind::Leaf => {
                        let _ = writeln!(out, "  n{id} [shape=box, label=\"{:.3}\"];", n.energy);
                    }
                    NodeKind::Barrier => {
                        let _ = writeln!(out, "  n{id} [shape=point, xlabel=\"{:.3}\"];", n.energy);
                    }
                }
                for &c in &n.children {
                    let gap = n.energy - self.nodes[c].energy;
                    let _ = writeln!(out, "  n{id} -> n{c} [len={gap:.4}, minlen={}];", (gap.round() as i64).max(1));
                }
            }
            let _ = writeln!(out, "}}");
        }
        out
    }

    /// Coordinate-wise mean of the members below `cut` of every component
    /// of `{h < cut}`.
    pub fn branch_means(&self, samples: &[Sample], cut: f64) -> Result<Vec<(usize, Vec<f64>)>> {
        let mut out = Vec::new();
        for id in self.components_at(cut) {
            let mut sum: Option<Vec<f64>> = None;
            let mut count = 0usize;
            for i in self.domain_members(id) {
                let s = &samples[i];
                if s.energy >= cut {
                    continue;
                }
                let x = s.state.coords().ok_or(Error::InvalidArgument("branch means need coordinates".into()))?;
                let acc = sum.get_or_insert_with(|| vec![0.0; x.len()]);
                acc.iter_mut().zip(x).for_each(|(a, v)| *a += v);
                count += 1;
            }
            let mean = sum.ok_or(Error::Empty("branch below the cut"))?;
            out.push((id, mean.into_iter().map(|v| v / count as f64).collect()));
        }
        Ok(out)
    }
}

/// Lowest-energy state among `members`.
pub fn argmin_state<'a>(samples: &'a [Sample], members: &[usize]) -> Option<&'a Sample> {
    members.iter().map(|&i| &samples[i]).min_by(|a, b| a.energy.total_cmp(&b.energy))
}
