//! Density of states from tempered and truncated chains.
//!
//! Chain `t` samples `exp(-max(h, H_t) / T_t) / Z_t`. Pooling all chains,
//! each sample `x` carries the volume weight
//! `1 / sum_t N_t exp(phi_t - max(h_x, H_t) / T_t)` with `phi_t = -log Z_t`
//! fixed by self-consistency. The weights are solved for without binning
//! (Newton's method on the convex pooled likelihood), then summed per ring.
//! Binless weights matter here: at low temperature the chain weight varies
//! by orders of magnitude across one ring, so evaluating it at the ring
//! midpoint would bias the estimate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DosEstimate, EnergyGrid, Sample};
use crate::par::{Exec, REDUCE_CHUNK};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosOptions {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for DosOptions {
    fn default() -> Self {
        DosOptions { tol: 1e-8, max_iter: 10_000, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainInfo {
    pub chain_id: u32,
    pub temperature: f64,
    pub truncation: Option<f64>,
    pub count: usize,
}

impl ChainInfo {
    #[inline]
    fn log_weight(&self, e: f64) -> f64 {
        let h = match self.truncation {
            Some(t) => e.max(t),
            None => e,
        };
        -h / self.temperature
    }
}

fn chains_of(samples: &[Sample]) -> Result<Vec<ChainInfo>> {
    let mut map: BTreeMap<u32, ChainInfo> = BTreeMap::new();
    for s in samples {
        let c = map.entry(s.chain_id).or_insert(ChainInfo {
            chain_id: s.chain_id,
            temperature: s.temperature,
            truncation: s.truncation,
            count: 0,
        });
        if c.temperature != s.temperature || c.truncation != s.truncation {
            return Err(Error::InvalidArgument(format!("chain {} mixes temperatures or truncations", s.chain_id)));
        }
        c.count += 1;
    }
    Ok(map.into_values().collect())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Pool<'a> {
    chains: &'a [ChainInfo],
    energies: Vec<f64>,
    mult: Vec<f64>,
    log_n: Vec<f64>,
}

impl Pool<'_> {
    /// `log sum_t N_t exp(phi_t + a_t(x))` written into `terms` per chain.
    #[inline]
    fn terms(&self, x: usize, phi: &[f64], terms: &mut [f64]) -> f64 {
        let e = self.energies[x];
        for (t, c) in self.chains.iter().enumerate() {
            terms[t] = self.log_n[t] + phi[t] + c.log_weight(e);
        }
        log_sum_exp(terms)
    }

    fn objective(&self, phi: &[f64], exec: Exec) -> f64 {
        let k = self.chains.len();
        let parts = exec.map_chunks(self.energies.len(), REDUCE_CHUNK, |r| {
            let mut terms = vec![0.0; k];
            r.map(|x| self.mult[x] * self.terms(x, phi, &mut terms)).sum::<f64>()
        });
        parts.into_iter().sum::<f64>() - self.chains.iter().zip(phi).map(|(c, p)| c.count as f64 * p).sum::<f64>()
    }

    /// Gradient and Hessian of the objective in `phi`.
    fn derivatives(&self, phi: &[f64], exec: Exec) -> (Vec<f64>, Vec<f64>) {
        let k = self.chains.len();
        let parts = exec.map_chunks(self.energies.len(), REDUCE_CHUNK, |r| {
            let mut terms = vec![0.0; k];
            let mut g = vec![0.0; k];
            let mut h = vec![0.0; k * k];
            for x in r {
                let lse = self.terms(x, phi, &mut terms);
                for w in terms.iter_mut() {
                    *w = (*w - lse).exp();
                }
                let c = self.mult[x];
                for s in 0..k {
                    let ws = c * terms[s];
                    g[s] += ws;
                    for u in s..k {
                        h[s * k + u] -= ws * terms[u];
                    }
                }
            }
            (g, h)
        });
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        for (pg, ph) in parts {
            g.iter_mut().zip(&pg).for_each(|(a, b)| *a += b);
            h.iter_mut().zip(&ph).for_each(|(a, b)| *a += b);
        }
        for s in 0..k {
            h[s * k + s] += g[s];
            for u in 0..s {
                h[s * k + u] = h[u * k + s];
            }
        }
        for (gs, c) in g.iter_mut().zip(self.chains) {
            *gs -= c.count as f64;
        }
        (g, h)
    }

    /// One self-consistent update: `phi_t = -log sum_x c_x exp(a_t(x)) / D(x)`.
    fn fixed_point(&self, phi: &[f64], exec: Exec) -> Vec<f64> {
        let k = self.chains.len();
        let parts = exec.map_chunks(self.energies.len(), REDUCE_CHUNK, |r| {
            let mut terms = vec![0.0; k];
            let mut acc = vec![Vec::with_capacity(r.len()); k];
            for x in r {
                let lse = self.terms(x, phi, &mut terms);
                let e = self.energies[x];
                for (t, c) in self.chains.iter().enumerate() {
                    acc[t].push(self.mult[x].ln() + c.log_weight(e) - lse);
                }
            }
            acc.iter().map(|v| log_sum_exp(v)).collect::<Vec<f64>>()
        });
        let mut out: Vec<f64> = (0..k)
            .map(|t| {
                let v: Vec<f64> = parts.iter().map(|p| p[t]).collect();
                -log_sum_exp(&v)
            })
            .collect();
        let base = out[0];
        out.iter_mut().for_each(|p| *p -= base);
        out
    }
}

fn check_coverage(chains: &[ChainInfo], samples: &[Sample], grid: &EnergyGrid) -> Result<()> {
    let k = chains.len();
    if k == 1 {
        return Ok(());
    }
    let pos: BTreeMap<u32, usize> = chains.iter().enumerate().map(|(i, c)| (c.chain_id, i)).collect();
    let mut rings: Vec<Vec<bool>> = vec![vec![false; grid.levels()]; k];
    for s in samples {
        if let Some(m) = grid.ring_of(s.energy) {
            rings[pos[&s.chain_id]][m] = true;
        }
    }
    let mut reached = vec![false; k];
    reached[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..k {
            if !reached[a] {
                continue;
            }
            for b in 0..k {
                if !reached[b] && (0..grid.levels()).any(|m| rings[a][m] && rings[b][m]) {
                    reached[b] = true;
                    changed = true;
                }
            }
        }
    }
    let missing: Vec<u32> = chains.iter().zip(&reached).filter(|(_, r)| !**r).map(|(c, _)| c.chain_id).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::CoverageGap(format!("chains {missing:?} share no energy ring with chain {}", chains[0].chain_id)))
    }
}

/// Estimates the density of states on every ring of `grid`.
pub fn estimate_dos(samples: &[Sample], grid: &EnergyGrid, opts: &DosOptions) -> Result<DosEstimate> {
    Ok(estimate_dos_detailed(samples, grid, opts)?.0)
}

/// Like [`estimate_dos`], also returning the per-chain info and the solved
/// `phi_t` (log inverse normalizers, `phi_0 = 0`).
pub fn estimate_dos_detailed(
    samples: &[Sample],
    grid: &EnergyGrid,
    opts: &DosOptions,
) -> Result<(DosEstimate, Vec<ChainInfo>, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    for (index, s) in samples.iter().enumerate() {
        if grid.ring_of(s.energy).is_none() {
            return Err(Error::OutOfGrid { index, energy: s.energy, top: grid.top() });
        }
    }
    let chains = chains_of(samples)?;
    check_coverage(&chains, samples, grid)?;
    let k = chains.len();

    let mut sorted: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    sorted.sort_by(f64::total_cmp);
    let (mut energies, mut mult) = (Vec::new(), Vec::new());
    for e in sorted {
        if energies.last() == Some(&e) {
            *mult.last_mut().unwrap() += 1.0;
        } else {
            energies.push(e);
            mult.push(1.0);
        }
    }
    let log_n: Vec<f64> = chains.iter().map(|c| (c.count as f64).ln()).collect();
    let pool = Pool { chains: &chains, energies, mult, log_n };
    let exec = opts.exec;

    let mut phi = vec![0.0; k];
    if k > 1 {
        // start from per-chain normalizers, then refine
        let start: Vec<f64> = chains
            .iter()
            .map(|c| {
                let v: Vec<f64> =
                    pool.energies.iter().zip(&pool.mult).map(|(&e, &m)| m.ln() + c.log_weight(e)).collect();
                -log_sum_exp(&v)
            })
            .collect();
        phi = start.iter().map(|p| p - start[0]).collect();
        phi = pool.fixed_point(&phi, exec);
        let mut value = pool.objective(&phi, exec);
        for _ in 0..opts.max_iter {
            let (g, h) = pool.derivatives(&phi, exec);
            let r = k - 1;
            let hm = DMatrix::from_fn(r, r, |i, j| h[(i + 1) * k + (j + 1)]);
            let gv = DVector::from_fn(r, |i, _| -g[i + 1]);
            let step = match hm.clone().cholesky() {
                Some(ch) => ch.solve(&gv),
                None => match hm.lu().solve(&gv) {
                    Some(s) => s,
                    None => gv.clone(),
                },
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> =
                    std::iter::once(0.0).chain((0..r).map(|i| phi[i + 1] + scale * step[i])).collect();
                let tv = pool.objective(&trial, exec);
                if tv <= value + 1e-12 * value.abs().max(1.0) {
                    accepted = Some((trial, tv));
                    break;
                }
                scale *= 0.5;
            }
            let Some((trial, tv)) = accepted else { break };
            let change = trial.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            phi = trial;
            value = tv;
            if change < opts.tol {
                break;
            }
        }
    }

    // log volume weight of each distinct energy, accumulated per ring
    let mut terms = vec![0.0; k];
    let mut per_ring: Vec<Vec<f64>> = vec![Vec::new(); grid.levels()];
    for x in 0..pool.energies.len() {
        let lse = pool.terms(x, &phi, &mut terms);
        let m = grid.ring_of(pool.energies[x]).expect("checked above");
        per_ring[m].push(pool.mult[x].ln() - lse);
    }
    let log_v: Vec<f64> = per_ring.iter().map(|v| log_sum_exp(v)).collect();
    let log_total = log_sum_exp(&log_v);

    let min_e = pool.energies[0];
    let levels = grid.levels();
    let mut midpoints = Vec::with_capacity(levels);
    let mut widths = Vec::with_capacity(levels);
    let mut values = Vec::with_capacity(levels);
    for (m, &lv) in log_v.iter().enumerate() {
        let lower = if m == 0 { min_e.min(grid.floor) } else { grid.lower(m) };
        let upper = grid.upper(m);
        let w = upper - lower;
        midpoints.push(0.5 * (lower + upper));
        widths.push(w);
        values.push(if lv == f64::NEG_INFINITY { 0.0 } else { (lv - log_total).exp() / w });
    }
    Ok((DosEstimate { midpoints, widths, values }, chains, phi))
}
