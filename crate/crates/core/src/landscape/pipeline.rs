//! Samples in, annotated tree out.

use serde::{Deserialize, Serialize};

use super::{bup_build, estimate_dos, local_dos, BupOptions, DosOptions, LandscapeTree, RingSummary};
use crate::error::Result;
use crate::metric::SpaceKind;
use crate::model::{build_energy_grid, subsample, EnergyGrid, GridStrategy, Sample};
use crate::par::Exec;
use crate::ringcluster::ClusterParams;
use crate::EnergyFn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub levels: usize,
    pub strategy: GridStrategy,
    /// Fraction of samples fed to the tree construction.
    pub subsample: f64,
    pub seed: u64,
    pub cluster: ClusterParams,
    pub min_link: Option<f64>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            levels: 50,
            strategy: GridStrategy::EqualCount,
            subsample: 1.0,
            seed: 0,
            cluster: ClusterParams::default(),
            min_link: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub tree: LandscapeTree,
    pub rings: Vec<RingSummary>,
    pub grid: EnergyGrid,
}

/// Grid over all energies, tree from a subsample, density of states from
/// all samples, then the local density of states of every branch.
///
/// `energy` enables interpolation rescue when `cfg.cluster.interpolation`
/// is set.
pub fn reconstruct(
    samples: &[Sample],
    space: &SpaceKind,
    cfg: &TreeConfig,
    energy: Option<&dyn EnergyFn>,
    exec: Exec,
) -> Result<Reconstruction> {
    let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let grid = build_energy_grid(&energies, cfg.levels, cfg.strategy)?;
    reconstruct_on(samples, space, &grid, cfg, energy, exec)
}

/// [`reconstruct`] on a given grid.
pub fn reconstruct_on(
    samples: &[Sample],
    space: &SpaceKind,
    grid: &EnergyGrid,
    cfg: &TreeConfig,
    energy: Option<&dyn EnergyFn>,
    exec: Exec,
) -> Result<Reconstruction> {
    let picked;
    let input = if cfg.subsample < 1.0 {
        picked = subsample(samples, cfg.subsample, cfg.seed)?;
        &picked[..]
    } else {
        samples
    };
    let opts = BupOptions { params: &cfg.cluster, exec, energy, min_link: cfg.min_link };
    let bup = bup_build(input, grid, space, &opts)?;
    let mut tree = bup.tree;
    let dos = estimate_dos(samples, grid, &DosOptions { exec, ..DosOptions::default() })?;
    local_dos(&mut tree, &dos)?;
    Ok(Reconstruction { tree, rings: bup.rings, grid: grid.clone() })
}
