//! Samplers producing tagged energy samples.

pub mod dp;
pub mod metropolis;
pub mod tempering;

pub use dp::{
    dp_forward, dp_ladder_samples, dp_sample, parse_sequence, segment_log_marginal, segmentation_energy, DpLadder,
    DpTables, SegmentModel, UNIFORM_DIRICHLET,
};
pub use metropolis::{default_sigma, metropolis_chain, restrict_energy, ChainRun, ChainSpec, Restricted};
pub use tempering::{geometric_ladder, parallel_tempering, swap_log_ratio, TemperingRun};
