//! Test energies, optimizers used to check reported minima, and brute-force
//! oracles. The oracles share no code with the tree construction.

pub mod dna;
pub mod layered;
pub mod optimize;
pub mod oracles;
pub mod seven_mode;
pub mod t_posterior;

pub use dna::{neighbor_descent, reference_theta, simulate_sequence, verify_local_minimum, TRUE_CHANGE_POINTS};
pub use layered::{layered_multimodal_energy, Layered};
pub use optimize::{gradient_descent, pairwise_barrier_approx, Descent, DescentOptions};
pub use oracles::{
    enumerate_posterior, enumerate_segmentations, exhaustive_tree_oracle, grid_tree_oracle, quadrature_dos_1d,
};
pub use seven_mode::{seven_mode_energy, SevenMode};
pub use t_posterior::{build_t_data, t_posterior_energy, TDataset};
