//! Reconstruction of energy landscapes from Monte Carlo samples.
//!
//! The energy of a (possibly unnormalized) density `f` is `h(x) = -log f(x)`.
//! This crate estimates the tree of sublevel sets of `h`: leaves are local
//! minima, internal nodes are the energy barriers at which the connected
//! components of `{x : h(x) < u}` merge. The tree is built bottom-up from
//! samples partitioned into energy rings, each ring clustered by single
//! linkage with statistical rules that separate within-component from
//! between-component nearest-neighbor distances.
//!
//! Module map:
//!
//! * [`model`] - states, samples, energy grids, ring assignment, subsampling
//! * [`metric`] - Euclidean and segmentation distances, neighbor moves
//! * [`slc`] - single-linkage dendrograms with boundary pairs
//! * [`ringcluster`] - connected components of one energy ring
//! * [`landscape`] - the bottom-up tree construction and its annotation
//! * [`samplers`] - tempered/truncated Metropolis, parallel tempering,
//!   exact change-point sampling
//! * [`testbeds`] - test energies, optimizers and brute-force oracles
//!
//! Data-parallel inner loops run through [`Exec`]; with the `parallel`
//! feature disabled every policy runs sequentially. Results are identical
//! under both policies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod index;
pub mod landscape;
pub mod metric;
pub mod model;
pub mod par;
pub mod ringcluster;
pub mod samplers;
pub mod slc;
pub mod testbeds;

pub use error::{Error, Result};
pub use landscape::{LandscapeTree, Node, NodeKind};
pub use model::{DosEstimate, EnergyGrid, GridStrategy, Sample, Segmentation, State};
pub use par::Exec;
pub use ringcluster::ClusterParams;

/// A scalar energy function on continuous coordinates.
///
/// Values may be `+inf` to forbid a region; samplers always reject moves
/// into such regions.
pub trait EnergyFn: Sync {
    fn energy(&self, x: &[f64]) -> f64;
}

impl<F> EnergyFn for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn energy(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// An energy function with an analytic gradient.
pub trait GradientFn: EnergyFn {
    /// Writes the gradient at `x` into `grad` and returns the energy.
    fn energy_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}
