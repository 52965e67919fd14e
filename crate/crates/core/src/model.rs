//! Domain types shared by every stage: states, samples, energy grids and the
//! density-of-states record, plus ring assignment, subsampling and the
//! JSON Lines sample format.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic generator for `(seed, stream)`.
///
/// ChaCha is counter based; distinct streams of one seed are independent,
/// which lets chains and strata draw without sharing state.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Change points of a sequence of length `len`.
///
/// A change point is the first position (1-based) of a new segment, so
/// segment `k` covers the half-open range `[z_{k-1}, z_k)` with `z_0 = 1`
/// and `z_{p+1} = len + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segmentation {
    pub cps: Vec<u32>,
    pub len: u32,
    #[serde(rename = "max_n")]
    pub max_points: u32,
}

impl Segmentation {
    pub fn new(cps: Vec<u32>, len: u32, max_points: u32) -> Result<Self> {
        let s = Segmentation { cps, len, max_points };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(len: u32, max_points: u32) -> Self {
        Segmentation { cps: Vec::new(), len, max_points }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::InvalidSegmentation("sequence length is zero".into()));
        }
        if self.cps.len() > self.max_points as usize {
            return Err(Error::InvalidSegmentation(format!(
                "{} change points exceed the maximum {}",
                self.cps.len(),
                self.max_points
            )));
        }
        let mut prev = 1;
        for &z in &self.cps {
            if z <= prev || z > self.len {
                return Err(Error::InvalidSegmentation(format!(
                    "change points {:?} must be strictly increasing within 2..={}",
                    self.cps, self.len
                )));
            }
            prev = z;
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.cps.len()
    }

    /// Segment bounds as half-open `(start, end)` pairs of 1-based positions.
    pub fn segments(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let p = self.cps.len();
        (0..=p).map(move |k| {
            let start = if k == 0 { 1 } else { self.cps[k - 1] };
            let end = if k == p { self.len + 1 } else { self.cps[k] };
            (start, end)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum State {
    #[serde(rename = "cont")]
    Continuous(Vec<f64>),
    #[serde(rename = "seg")]
    Discrete(Segmentation),
}

impl State {
    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            State::Continuous(x) => Some(x),
            State::Discrete(_) => None,
        }
    }

    pub fn segmentation(&self) -> Option<&Segmentation> {
        match self {
            State::Discrete(s) => Some(s),
            State::Continuous(_) => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, State::Continuous(_))
    }
}

/// One Monte Carlo draw, tagged with the chain that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(rename = "chain")]
    pub chain_id: u32,
    #[serde(rename = "temp")]
    pub temperature: f64,
    #[serde(rename = "trunc")]
    pub truncation: Option<f64>,
    pub energy: f64,
    pub state: State,
}

impl Sample {
    /// Energy seen by the chain's target, `max(h, H)`.
    pub fn truncated_energy(&self) -> f64 {
        match self.truncation {
            Some(t) => self.energy.max(t),
            None => self.energy,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridStrategy {
    #[default]
    EqualCount,
    EqualWidth,
}

/// Ring boundaries `u_1 < ... < u_M`. Ring `m` (0-based here) covers
/// `[u_{m-1}, u_m)` with `u_{-1} = -inf`; `floor` is the smallest energy the
/// grid was built from and serves as the lower edge of the first ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub boundaries: Vec<f64>,
    pub floor: f64,
}

impl EnergyGrid {
    pub fn new(boundaries: Vec<f64>, floor: f64) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::DegenerateGrid("no boundaries".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::DegenerateGrid("boundaries must be finite and strictly increasing".into()));
        }
        if floor >= boundaries[0] {
            return Err(Error::DegenerateGrid("floor must lie below the first boundary".into()));
        }
        Ok(EnergyGrid { boundaries, floor })
    }

    pub fn levels(&self) -> usize {
        self.boundaries.len()
    }

    pub fn top(&self) -> f64 {
        *self.boundaries.last().expect("grid has at least one boundary")
    }

    /// Lower edge of ring `m`; the first ring starts at `floor`.
    pub fn lower(&self, m: usize) -> f64 {
        if m == 0 {
            self.floor
        } else {
            self.boundaries[m - 1]
        }
    }

    pub fn upper(&self, m: usize) -> f64 {
        self.boundaries[m]
    }

    pub fn width(&self, m: usize) -> f64 {
        self.upper(m) - self.lower(m)
    }

    pub fn midpoint(&self, m: usize) -> f64 {
        0.5 * (self.upper(m) + self.lower(m))
    }

    /// Ring index of `energy`, or `None` at or above the top boundary.
    pub fn ring_of(&self, energy: f64) -> Option<usize> {
        let m = self.boundaries.partition_point(|&b| b <= energy);
        (m < self.boundaries.len()).then_some(m)
    }
}

fn top_slack(max: f64) -> f64 {
    max + max.abs().max(1.0) * 8.0 * f64::EPSILON
}

/// Builds an `levels`-ring grid over `energies`.
pub fn build_energy_grid(energies: &[f64], levels: usize, strategy: GridStrategy) -> Result<EnergyGrid> {
    if energies.is_empty() {
        return Err(Error::Empty("energies"));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("level count must be at least 1".into()));
    }
    if let Some(bad) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite energy {bad}")));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let top = top_slack(max);

    let mut boundaries = Vec::with_capacity(levels);
    match strategy {
        GridStrategy::EqualCount => {
            let mut distinct = sorted.clone();
            distinct.dedup();
            if levels > distinct.len() {
                return Err(Error::DegenerateGrid(format!(
                    "{levels} rings requested for {} distinct energies",
                    distinct.len()
                )));
            }
            let (base, extra) = (n / levels, n % levels);
            let mut end = 0;
            for m in 0..levels - 1 {
                end += base + usize::from(m < extra);
                let mut u = sorted[end.min(n - 1)];
                if let Some(&prev) = boundaries.last() {
                    if u <= prev {
                        // ties pushed the cut up; move to the next distinct value
                        let next = distinct.partition_point(|&d| d <= prev);
                        if next >= distinct.len() {
                            return Err(Error::DegenerateGrid("ties leave too few distinct cut points".into()));
                        }
                        u = distinct[next];
                    }
                }
                if u <= min {
                    u = distinct[1.min(distinct.len() - 1)];
                }
                if u > max {
                    return Err(Error::DegenerateGrid("ties leave too few distinct cut points".into()));
                }
                boundaries.push(u);
            }
        }
        GridStrategy::EqualWidth => {
            if levels > 1 && max <= min {
                return Err(Error::DegenerateGrid("all energies are equal".into()));
            }
            let width = (max - min) / levels as f64;
            for m in 1..levels {
                boundaries.push(min + width * m as f64);
            }
        }
    }
    boundaries.push(top);
    EnergyGrid::new(boundaries, min)
}

/// Ring index for every sample.
pub fn assign_level_sets(samples: &[Sample], grid: &EnergyGrid) -> Result<Vec<usize>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| grid.ring_of(s.energy).ok_or(Error::OutOfGrid { index, energy: s.energy, top: grid.top() }))
        .collect()
}

/// Draws `ceil(fraction * n)` samples without replacement, stratified by
/// chain. Returned indices are ascending.
pub fn subsample_indices(samples: &[Sample], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("subsample fraction {fraction} not in (0, 1]")));
    }
    let n = samples.len();
    if fraction == 1.0 {
        return Ok((0..n).collect());
    }
    let target = ((fraction * n as f64).ceil() as usize).min(n);

    let mut by_chain: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, s) in samples.iter().enumerate() {
        by_chain.entry(s.chain_id).or_default().push(i);
    }
    // largest-remainder allocation of the target across chains
    let mut alloc: Vec<(u32, usize, f64)> = by_chain
        .iter()
        .map(|(&c, idx)| {
            let exact = target as f64 * idx.len() as f64 / n as f64;
            (c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = target - alloc.iter().map(|a| a.1).sum::<usize>();
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| alloc[b].2.total_cmp(&alloc[a].2).then(alloc[a].0.cmp(&alloc[b].0)));
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if alloc[k].1 < by_chain[&alloc[k].0].len() {
            alloc[k].1 += 1;
            left -= 1;
        }
    }

    let mut out = Vec::with_capacity(target);
    for (chain, take, _) in alloc {
        let idx = &by_chain[&chain];
        let mut rng = seeded_rng(seed, u64::from(chain));
        let picked = rand::seq::index::sample(&mut rng, idx.len(), take);
        out.extend(picked.into_iter().map(|k| idx[k]));
    }
    out.sort_unstable();
    Ok(out)
}

pub fn subsample(samples: &[Sample], fraction: f64, seed: u64) -> Result<Vec<Sample>> {
    Ok(subsample_indices(samples, fraction, seed)?.into_iter().map(|i| samples[i].clone()).collect())
}

/// Per-ring density of states. `values[m]` is the estimate on ring `m`,
/// normalized so that `sum(values * widths) == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosEstimate {
    pub midpoints: Vec<f64>,
    pub widths: Vec<f64>,
    pub values: Vec<f64>,
}

impl DosEstimate {
    pub fn levels(&self) -> usize {
        self.values.len()
    }

    /// Ring volumes `values * widths`.
    pub fn volumes(&self) -> Vec<f64> {
        self.values.iter().zip(&self.widths).map(|(v, w)| v * w).collect()
    }
}

pub fn write_samples<W: Write>(mut out: W, samples: &[Sample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    let mut kind = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if s.temperature <= 0.0 || !s.temperature.is_finite() {
            return Err(Error::Parse { line: i + 1, msg: format!("temperature {} must be positive", s.temperature) });
        }
        if let State::Discrete(seg) = &s.state {
            seg.validate().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        match kind {
            None => kind = Some(s.state.is_continuous()),
            Some(k) if k != s.state.is_continuous() => return Err(Error::MixedStates),
            _ => {}
        }
        out.push(s);
    }
    Ok(out)
}
