//! Posterior of a multivariate t location with a flat prior and six
//! observations placed in three pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::SpaceKind;
use crate::samplers::{geometric_ladder, ChainSpec};
use crate::{EnergyFn, GradientFn};

pub const DIM: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TDataset {
    pub y: [[f64; DIM]; DIM],
    pub nu: f64,
}

/// The six observations: each pair `(y_{2k-1}, y_{2k})` sits at `A` in two
/// shared coordinates and at `a_k` in one coordinate pair of its own.
pub fn build_t_data(big_a: f64, a1: f64, a2: f64, a3: f64) -> Result<TDataset> {
    if [a1, a2, a3].iter().any(|&a| !(a > 0.0 && a < big_a)) {
        return Err(Error::InvalidArgument(format!("need A > a_j > 0, got A={big_a}, a=({a1}, {a2}, {a3})")));
    }
    let (a, b, c) = (a1, a2, a3);
    let big = big_a;
    Ok(TDataset {
        y: [
            [big, big, a, a, 0.0, 0.0],
            [big, big, 0.0, 0.0, a, a],
            [b, b, big, big, 0.0, 0.0],
            [0.0, 0.0, big, big, b, b],
            [c, c, 0.0, 0.0, big, big],
            [0.0, 0.0, c, c, big, big],
        ],
        nu: 5.0,
    })
}

impl TDataset {
    pub fn symmetric() -> Self {
        build_t_data(40.0, 4.0, 4.0, 4.0).expect("valid constants")
    }

    pub fn asymmetric() -> Self {
        build_t_data(40.0, 2.0, 3.0, 4.0).expect("valid constants")
    }

    /// Sampling box: the data hull `[0, A]^6` widened by 5 on each side.
    pub fn space(&self) -> SpaceKind {
        let (lo, hi) = self.bounds();
        SpaceKind::cube(DIM, lo - 5.0, hi + 5.0).expect("valid box")
    }

    /// Ten rungs with temperatures geometric in `[0.2, 4]` and truncation
    /// levels geometric in `truncation`; rung `k` starts at `y_(k mod 6)`.
    pub fn ladder(&self, steps: usize, truncation: (f64, f64), seed: u64) -> Vec<ChainSpec> {
        let temps = geometric_ladder(0.2, 4.0, 10);
        let truncs = geometric_ladder(truncation.0, truncation.1, 10);
        temps
            .iter()
            .zip(&truncs)
            .enumerate()
            .map(|(k, (&t, &h))| ChainSpec {
                chain_id: k as u32,
                temperature: t,
                truncation: Some(h),
                steps,
                burn_in: 0.1,
                sigma: t.sqrt() * (1.0 + 0.5 * k as f64),
                seed,
                init: self.y[k % DIM].to_vec(),
            })
            .collect()
    }

    /// Every observation's coordinates lie in `[0, A]`.
    pub fn bounds(&self) -> (f64, f64) {
        let hi = self.y.iter().flatten().copied().fold(0.0, f64::max);
        (0.0, hi)
    }
}

/// `h(mu) = (nu + p)/2 * sum_i log(1 + |y_i - mu|^2 / nu)`.
pub fn t_posterior_energy(mu: &[f64], data: &TDataset) -> f64 {
    let c = 0.5 * (data.nu + DIM as f64);
    data.y
        .iter()
        .map(|y| {
            let d2: f64 = y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2 / data.nu).ln_1p()
        })
        .sum::<f64>()
        * c
}

impl EnergyFn for TDataset {
    fn energy(&self, x: &[f64]) -> f64 {
        t_posterior_energy(x, self)
    }
}

impl GradientFn for TDataset {
    fn energy_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k = 0.5 * (self.nu + DIM as f64);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut h = 0.0;
        for y in &self.y {
            let d2: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            h += (d2 / self.nu).ln_1p();
            let w = 2.0 * k / (self.nu + d2);
            for j in 0..DIM {
                grad[j] += w * (x[j] - y[j]);
            }
        }
        k * h
    }
}
