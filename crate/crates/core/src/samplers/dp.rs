//! Exact sampling of change-point segmentations of a DNA sequence.
//!
//! Segments are i.i.d. multinomial with a Dirichlet prior integrated out;
//! the number of change points is uniform on `0..=N` and every placement
//! of a given number is equally likely. Forward sums over the last change
//! point give the marginal of `p`, after which change points are drawn from
//! the right end backwards. Tempering raises every factor to `1/T`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{seeded_rng, Sample, Segmentation, State};
use crate::par::Exec;

pub const UNIFORM_DIRICHLET: [f64; 4] = [1.0; 4];

/// Reads a nucleotide sequence: `a/c/g/t` in any case, whitespace ignored,
/// FASTA header lines skipped. Returns letter codes `0..4`.
pub fn parse_sequence(text: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('>') {
            continue;
        }
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            out.push(match ch.to_ascii_lowercase() {
                'a' => 0,
                'c' => 1,
                'g' => 2,
                't' => 3,
                other => return Err(Error::Parse { line: n + 1, msg: format!("unexpected character {other:?}") }),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    Ok(out)
}

pub fn sequence_to_string(seq: &[u8]) -> String {
    seq.iter().map(|&c| b"acgt"[c as usize] as char).collect()
}

/// `log P(segment | no change point)` for letter counts under a Dirichlet
/// prior `alpha`.
pub fn segment_log_marginal(counts: [u32; 4], alpha: [f64; 4]) -> f64 {
    let a: f64 = alpha.iter().sum();
    let n: f64 = counts.iter().map(|&c| f64::from(c)).sum();
    let mut v = ln_gamma(a) - ln_gamma(a + n);
    for j in 0..4 {
        if counts[j] > 0 {
            v += ln_gamma(alpha[j] + f64::from(counts[j])) - ln_gamma(alpha[j]);
        }
    }
    v
}

/// Sequence with prefix letter counts for O(1) segment marginals.
#[derive(Clone, Debug)]
pub struct SegmentModel {
    pub seq: Vec<u8>,
    pub max_points: u32,
    pub alpha: [f64; 4],
    prefix: Vec<[u32; 4]>,
    ln_fact: Vec<f64>,
}

impl SegmentModel {
    pub fn new(seq: Vec<u8>, max_points: u32, alpha: [f64; 4]) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::Empty("sequence"));
        }
        if max_points as usize >= seq.len() {
            return Err(Error::InvalidArgument(format!("need N < L, got N={max_points}, L={}", seq.len())));
        }
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidArgument("Dirichlet parameters must be positive".into()));
        }
        let mut prefix = Vec::with_capacity(seq.len() + 1);
        prefix.push([0u32; 4]);
        for &c in &seq {
            let mut next = *prefix.last().unwrap();
            next[c as usize] += 1;
            prefix.push(next);
        }
        let ln_fact = (0..=seq.len()).map(|n| ln_gamma(n as f64 + 1.0)).collect();
        Ok(SegmentModel { seq, max_points, alpha, prefix, ln_fact })
    }

    /// `log C(n, k)` for `n <= L`.
    pub fn ln_choose(&self, n: u32, k: u32) -> f64 {
        let (n, k) = (n as usize, k as usize);
        self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
    }

    /// Untempered segment marginals of every `i..=l`, row-major in `i`.
    fn segment_table(&self, exec: Exec) -> Vec<f64> {
        let n = self.seq.len();
        let mut seg = vec![f64::NEG_INFINITY; n * n];
        exec.for_each_mut(&mut seg, |idx, v| {
            let (i, l) = (idx / n + 1, idx % n + 1);
            if i <= l {
                *v = self.segment(i as u32, l as u32);
            }
        });
        seg
    }

    pub fn len(&self) -> u32 {
        self.seq.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Letter counts of positions `i..=l` (1-based).
    pub fn counts(&self, i: u32, l: u32) -> [u32; 4] {
        let (a, b) = (&self.prefix[i as usize - 1], &self.prefix[l as usize]);
        [b[0] - a[0], b[1] - a[1], b[2] - a[2], b[3] - a[3]]
    }

    pub fn segment(&self, i: u32, l: u32) -> f64 {
        segment_log_marginal(self.counts(i, l), self.alpha)
    }

    /// `-log` of the unnormalized posterior of `z`.
    pub fn energy(&self, z: &Segmentation) -> Result<f64> {
        if z.len != self.len() {
            return Err(Error::LengthMismatch(z.len, self.len()));
        }
        if z.max_points != self.max_points {
            return Err(Error::InvalidSegmentation(format!(
                "segmentation allows {} change points, model {}",
                z.max_points, self.max_points
            )));
        }
        z.validate()?;
        Ok(self.energy_unchecked(&z.cps))
    }

    pub(crate) fn energy_unchecked(&self, cps: &[u32]) -> f64 {
        let len = self.len();
        let mut e = f64::from(self.max_points + 1).ln() + self.ln_choose(len - 1, cps.len() as u32);
        let mut start = 1;
        for &z in cps.iter().chain(std::iter::once(&(len + 1))) {
            e -= self.segment(start, z - 1);
            start = z;
        }
        e
    }
}

/// Energy of a segmentation of `seq`.
pub fn segmentation_energy(z: &Segmentation, seq: &[u8], max_points: u32, alpha: [f64; 4]) -> Result<f64> {
    SegmentModel::new(seq.to_vec(), max_points, alpha)?.energy(z)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Precomputed tables for exact tempered sampling.
#[derive(Clone, Debug)]
pub struct DpTables {
    pub model: SegmentModel,
    pub temperature: f64,
    /// `seg[(i - 1) * L + (l - 1)]`: tempered segment marginal of `i..=l`.
    seg: Vec<f64>,
    /// `forward[k][l]`: tempered `log P(y_1..y_l | k change points)`,
    /// `l` 1-based (index 0 unused).
    pub forward: Vec<Vec<f64>>,
}

impl DpTables {
    /// Tempered segment marginal of positions `i..=l`.
    pub fn seg(&self, i: u32, l: u32) -> f64 {
        let n = self.model.len() as usize;
        self.seg[(i as usize - 1) * n + (l as usize - 1)]
    }

    fn log_prior_place(&self, z: u32, l: u32, k: u32) -> f64 {
        (self.model.ln_choose(z - 2, k - 1) - self.model.ln_choose(l - 1, k)) / self.temperature
    }

    /// Log-weight of placing change point `k` at `z` given `k` change points
    /// in `1..=l`.
    fn term(&self, k: u32, z: u32, l: u32) -> f64 {
        self.forward[k as usize - 1][z as usize - 1] + self.seg(z, l) + self.log_prior_place(z, l, k)
    }

    /// Tempered marginal `P(p = k | Y; T)` for `k = 0..=N`.
    pub fn count_marginal(&self) -> Vec<f64> {
        let l = self.model.len() as usize;
        let logs: Vec<f64> = self.forward.iter().map(|row| row[l]).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }
}

/// Builds the forward tables at temperature `T`.
pub fn dp_forward(model: &SegmentModel, temperature: f64, exec: Exec) -> Result<DpTables> {
    forward_from(model, &model.segment_table(exec), temperature, exec)
}

fn forward_from(model: &SegmentModel, base: &[f64], temperature: f64, exec: Exec) -> Result<DpTables> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
    }
    let n = model.len() as usize;
    let seg: Vec<f64> = base.iter().map(|v| v / temperature).collect();
    let mut tables = DpTables { model: model.clone(), temperature, seg, forward: Vec::new() };
    let row0: Vec<f64> = (0..=n).map(|l| if l == 0 { f64::NEG_INFINITY } else { tables.seg(1, l as u32) }).collect();
    tables.forward.push(row0);
    for k in 1..=model.max_points {
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        {
            let t = &tables;
            exec.for_each_mut(&mut row, |l, v| {
                let l = l as u32;
                if l > k {
                    let mut acc = f64::NEG_INFINITY;
                    for z in k + 1..=l {
                        acc = log_add(acc, t.term(k, z, l));
                    }
                    *v = acc;
                }
            });
        }
        tables.forward.push(row);
    }
    Ok(tables)
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

fn cdf_of(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    let mut out: Vec<f64> = logs
        .iter()
        .map(|v| {
            acc += (v - m).exp();
            acc
        })
        .collect();
    out.iter_mut().for_each(|c| *c /= acc);
    out
}

/// Draws `n_draws` i.i.d. segmentations from the tempered posterior.
pub fn dp_sample(tables: &DpTables, n_draws: usize, seed: u64, stream: u64) -> Vec<Segmentation> {
    let len = tables.model.len();
    let count_cdf = cdf_of(&tables.forward.iter().map(|row| row[len as usize]).collect::<Vec<_>>());
    let mut cache: HashMap<(u32, u32), Vec<f64>> = HashMap::new();
    let mut rng = seeded_rng(seed, stream);
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let p = draw(&count_cdf, rng.random()) as u32;
        let mut cps = vec![0u32; p as usize];
        let mut l = len;
        for k in (1..=p).rev() {
            let cdf = cache
                .entry((k, l))
                .or_insert_with(|| cdf_of(&(k + 1..=l).map(|z| tables.term(k, z, l)).collect::<Vec<_>>()));
            let z = k + 1 + draw(cdf, rng.random()) as u32;
            cps[k as usize - 1] = z;
            l = z - 1;
        }
        out.push(Segmentation { cps, len, max_points: tables.model.max_points });
    }
    out
}

/// Ladder of tempered exact samplers, one chain per temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpLadder {
    pub temperatures: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
}

/// Runs every rung of `ladder` and tags draws with their T = 1 energy.
pub fn dp_ladder_samples(model: &SegmentModel, ladder: &DpLadder, exec: Exec) -> Result<Vec<Sample>> {
    let base = model.segment_table(exec);
    let runs = exec.map_range(ladder.temperatures.len(), |c| -> Result<Vec<Sample>> {
        let t = ladder.temperatures[c];
        let tables = forward_from(model, &base, t, Exec::Sequential)?;
        Ok(dp_sample(&tables, ladder.draws, ladder.seed, c as u64)
            .into_iter()
            .map(|z| Sample {
                chain_id: c as u32,
                temperature: t,
                truncation: None,
                energy: model.energy_unchecked(&z.cps),
                state: State::Discrete(z),
            })
            .collect())
    });
    let mut out = Vec::new();
    for r in runs {
        out.extend(r?);
    }
    Ok(out)
}
