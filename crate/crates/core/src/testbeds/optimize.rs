//! Deterministic local search used to check reported minima and barriers.

use serde::{Deserialize, Serialize};

use crate::metric::interpolate_max_energy;
use crate::{EnergyFn, GradientFn};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { tol: 1e-8, max_iter: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descent {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Steepest descent with Armijo backtracking. The trial step starts at
/// twice the last accepted one.
pub fn gradient_descent<G: GradientFn + ?Sized>(f: &G, x0: &[f64], opts: DescentOptions) -> Descent {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut h = f.energy_grad(&x, &mut g);
    let mut gn = norm(&g);
    let mut step = 1.0;
    let mut trial = vec![0.0; n];
    let mut it = 0;
    while gn >= opts.tol && it < opts.max_iter {
        it += 1;
        step *= 2.0;
        let mut moved = false;
        while step > 1e-20 {
            for k in 0..n {
                trial[k] = x[k] - step * g[k];
            }
            let ht = f.energy(&trial);
            if ht <= h - 1e-4 * step * gn * gn {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        x.copy_from_slice(&trial);
        h = f.energy_grad(&x, &mut g);
        gn = norm(&g);
    }
    Descent { converged: gn < opts.tol, x, energy: h, grad_norm: gn, iterations: it }
}

/// Largest energy along the segment between every pair of minima.
pub fn pairwise_barrier_approx<E: EnergyFn + ?Sized>(
    minima: &[Vec<f64>],
    energy: &E,
    n_points: usize,
) -> Vec<Vec<f64>> {
    let k = minima.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = interpolate_max_energy(&minima[i], &minima[j], energy, n_points);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}
