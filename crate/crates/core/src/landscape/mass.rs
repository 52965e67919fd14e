//! Local density of states and Boltzmann masses of branches.

use super::{LandscapeTree, Mass};
use crate::error::{Error, Result};
use crate::model::DosEstimate;

/// Splits every ring's density of states among the branches holding its
/// samples, in proportion to their sample counts.
pub fn local_dos(tree: &mut LandscapeTree, dos: &DosEstimate) -> Result<()> {
    let levels = dos.levels();
    let mut totals = vec![0usize; levels];
    for n in &tree.nodes {
        for (m, &c) in n.rings().zip(&n.ring_counts) {
            if m >= levels {
                return Err(Error::InvalidArgument(format!("tree ring {m} beyond the {levels}-ring estimate")));
            }
            totals[m] += c;
        }
    }
    for n in &mut tree.nodes {
        let local = n
            .rings()
            .zip(&n.ring_counts)
            .map(|(m, &c)| if totals[m] == 0 { 0.0 } else { c as f64 / totals[m] as f64 * dos.values[m] })
            .collect();
        n.local_dos = Some(local);
    }
    tree.dos = Some(dos.clone());
    Ok(())
}

fn boltzmann(dos: &DosEstimate, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
    }
    let reference =
        dos.midpoints.iter().zip(&dos.values).filter(|(_, &v)| v > 0.0).map(|(&u, _)| u).fold(f64::INFINITY, f64::min);
    Ok(dos.midpoints.iter().zip(&dos.widths).map(|(&u, &w)| (-(u - reference) / temperature).exp() * w).collect())
}

fn mass_over(tree: &LandscapeTree, nodes: &[usize], temperature: f64) -> Result<f64> {
    let dos = tree.dos.as_ref().ok_or(Error::Unannotated)?;
    let weight = boltzmann(dos, temperature)?;
    let denom: f64 = dos.values.iter().zip(&weight).map(|(v, w)| v * w).sum();
    let mut num = 0.0;
    for &id in nodes {
        let n = &tree.nodes[id];
        let local = n.local_dos.as_ref().ok_or(Error::Unannotated)?;
        num += n.rings().zip(local).map(|(m, v)| v * weight[m]).sum::<f64>();
    }
    Ok((num / denom).clamp(0.0, 1.0))
}

/// Probability at temperature `T` of the domain of `node`: the node's own
/// rings and those of all its descendants.
pub fn branch_mass(tree: &LandscapeTree, node: usize, temperature: f64) -> Result<f64> {
    mass_over(tree, &tree.subtree(node), temperature)
}

/// Probability of the rings owned by `node` alone, i.e. the branch segment
/// between its children (or its minimum) and its parent barrier.
pub fn segment_mass(tree: &LandscapeTree, node: usize, temperature: f64) -> Result<f64> {
    mass_over(tree, &[node], temperature)
}

impl LandscapeTree {
    /// Stores branch masses at each temperature; `mass` holds the first.
    pub fn annotate_masses(&mut self, temperatures: &[f64]) -> Result<()> {
        for id in 0..self.nodes.len() {
            let masses = temperatures
                .iter()
                .map(|&t| Ok(Mass { temperature: t, value: branch_mass(self, id, t)? }))
                .collect::<Result<Vec<_>>>()?;
            self.nodes[id].mass = masses.first().copied();
            self.nodes[id].masses = masses;
        }
        Ok(())
    }
}
