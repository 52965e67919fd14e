use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metropolis::{truncated, ChainSpec, Walker};
use crate::error::{Error, Result};
use crate::metric::SpaceKind;
use crate::model::{seeded_rng, Sample};
use crate::par::Exec;
use crate::EnergyFn;

/// Stream id reserved for swap decisions; chain streams use their ids.
const SWAP_STREAM: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperingRun {
    /// Post-burn-in samples ordered by (rung, step).
    pub samples: Vec<Sample>,
    pub acceptance: Vec<f64>,
    /// Swap acceptance rate per adjacent pair `(k, k + 1)`.
    pub swap_acceptance: Vec<f64>,
}

/// `n` values spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_ladder(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect(),
    }
}

/// Log acceptance ratio for exchanging the states of rungs `a` and `b`.
pub fn swap_log_ratio(a: &ChainSpec, ha: f64, b: &ChainSpec, hb: f64) -> f64 {
    let e = |s: &ChainSpec, h: f64| -truncated(h, s.truncation) / s.temperature;
    (e(a, hb) + e(b, ha)) - (e(a, ha) + e(b, hb))
}

/// Replica exchange over a ladder of chains. Rungs advance `swap_interval`
/// steps between swap rounds; rounds alternate between even and odd
/// adjacent pairs. `swap_interval == 0` disables swaps.
pub fn parallel_tempering<E: EnergyFn + ?Sized>(
    energy: &E,
    space: &SpaceKind,
    ladder: &[ChainSpec],
    swap_interval: usize,
    seed: u64,
    exec: Exec,
) -> Result<TemperingRun> {
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument("parallel tempering needs at least two rungs".into()));
    }
    let steps = ladder[0].steps;
    if ladder.iter().any(|s| s.steps != steps) {
        return Err(Error::InvalidArgument("all rungs must run the same number of steps".into()));
    }
    let mut walkers: Vec<(Walker, Vec<Sample>)> = ladder
        .iter()
        .map(|s| Ok((Walker::new(energy, space, s)?, Vec::with_capacity(s.steps - s.burn_in_steps()))))
        .collect::<Result<_>>()?;
    let pairs = ladder.len() - 1;
    let (mut tried, mut taken) = (vec![0usize; pairs], vec![0usize; pairs]);
    let mut swap_rng = seeded_rng(seed, SWAP_STREAM);
    let block = if swap_interval == 0 { steps } else { swap_interval };
    let mut done = 0;
    let mut round = 0usize;
    while done < steps {
        let n = block.min(steps - done);
        exec.for_each_mut(&mut walkers, |_, (w, out)| w.advance(energy, space, n, out));
        done += n;
        if swap_interval == 0 || done >= steps {
            continue;
        }
        for k in (round % 2..pairs).step_by(2) {
            let (lo, hi) = walkers.split_at_mut(k + 1);
            let (a, b) = (&mut lo[k].0, &mut hi[0].0);
            let log_r = swap_log_ratio(&a.spec, a.h, &b.spec, b.h);
            let u: f64 = swap_rng.random();
            tried[k] += 1;
            if log_r >= 0.0 || u < log_r.exp() {
                std::mem::swap(&mut a.x, &mut b.x);
                std::mem::swap(&mut a.h, &mut b.h);
                taken[k] += 1;
            }
        }
        round += 1;
    }
    let acceptance = walkers
        .iter()
        .map(|(w, _)| if w.proposed == 0 { 0.0 } else { w.accepted as f64 / w.proposed as f64 })
        .collect();
    let swap_acceptance =
        tried.iter().zip(&taken).map(|(&t, &k)| if t == 0 { 0.0 } else { k as f64 / t as f64 }).collect();
    let samples = walkers.into_iter().flat_map(|(_, out)| out).collect();
    Ok(TemperingRun { samples, acceptance, swap_acceptance })
}
