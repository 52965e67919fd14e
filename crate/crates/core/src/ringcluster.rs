//! Connected components of one energy ring.
//!
//! A ring is clustered by single linkage; the number of components is then
//! bracketed by jump detectors on the merge heights (the nearest-neighbor
//! distances of the ring). Continuous rings use the censored exponential
//! model for `n * r^p`; segmentation rings use a censored geometric model.
//! Splits beyond the lower bound are accepted one merge at a time and only
//! if the smaller daughter is large enough or an energy wall separates it.
//!
//! Repeated states (Metropolis rejections, repeated posterior draws) are
//! collapsed before clustering: the distance statistics and the size rule
//! count distinct states, and every copy lands in its state's cluster.

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{euclidean, interpolate_max_energy, seg_distance};
use crate::model::Segmentation;
use crate::par::Exec;
use crate::slc::{single_linkage, Cluster, Dendrogram};
use crate::EnergyFn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub delta_low: f64,
    pub delta_high: f64,
    pub k_max: usize,
    pub n_min: usize,
    pub alpha: f64,
    pub interp_points: usize,
    pub interpolation: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            delta_low: 0.5,
            delta_high: 0.95,
            k_max: 100,
            n_min: 50,
            alpha: 10.0,
            interp_points: 100,
            interpolation: false,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.delta_low && self.delta_low < self.delta_high && self.delta_high < 1.0) {
            return Err(Error::InvalidArgument("need 0 < delta_low < delta_high < 1".into()));
        }
        if self.k_max < 2 {
            return Err(Error::InvalidArgument("k_max must be at least 2".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        if self.interp_points < 2 {
            return Err(Error::InvalidArgument("interp_points must be at least 2".into()));
        }
        Ok(())
    }
}

/// `theta_k = (sum_{i <= n-k} y_(i) + k * y_(n-k)) / (n - k)` for ascending `y`.
pub fn censored_exponential_theta(y: &[f64], k: usize) -> Result<f64> {
    let n = y.len();
    if k >= n {
        return Err(Error::InvalidArgument(format!("censoring {k} of {n} observations")));
    }
    let kept = &y[..n - k];
    Ok((kept.iter().sum::<f64>() + k as f64 * kept[n - k - 1]) / (n - k) as f64)
}

/// `theta_k` for `k = 0..count` from one pass over prefix sums.
fn theta_ladder(sorted: &[f64], count: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in sorted {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..count).map(|k| (prefix[n - k] + k as f64 * sorted[n - k - 1]) / (n - k) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentBounds {
    pub k_low: usize,
    pub k_high: usize,
    pub probs: Vec<f64>,
    /// Set when no `k` passed the threshold and the bound fell back to `k_max`.
    pub flagged: bool,
}

/// Lower and upper bounds on the number of components from nearest-neighbor
/// distances `r` of a `dim`-dimensional sample.
pub fn continuous_component_bounds(r: &[f64], dim: usize, params: &ClusterParams) -> Result<ComponentBounds> {
    if r.len() <= params.k_max {
        return Err(Error::InsufficientSamples { n: r.len(), needed: params.k_max });
    }
    Ok(exponential_bounds(r, dim, params))
}

fn exponential_bounds(r: &[f64], dim: usize, params: &ClusterParams) -> ComponentBounds {
    let n = r.len() as f64;
    let mut y: Vec<f64> = r.iter().map(|&v| n * v.powi(dim as i32)).collect();
    y.sort_by(f64::total_cmp);
    let count = params.k_max.min(y.len());
    let inv: Vec<f64> = theta_ladder(&y, count).into_iter().map(|t| 1.0 / t).collect();
    let total: f64 = inv.iter().sum();
    let probs: Vec<f64> = inv.iter().map(|v| v / total).collect();
    let mut flagged = false;
    let mut bound = |delta: f64| {
        let cut = delta / params.k_max as f64;
        match probs.iter().position(|&p| p > cut) {
            Some(k) => 1 + k,
            None => {
                flagged = true;
                params.k_max
            }
        }
    };
    let (k_low, k_high) = (bound(params.delta_low), bound(params.delta_high));
    ComponentBounds { k_low, k_high, probs, flagged }
}

/// `(beta_k, theta_k)` of the geometric model with the `k` largest of the
/// ascending distances `d` censored.
pub fn censored_geometric_estimates(d: &[u32], k: usize) -> Result<(f64, f64)> {
    let n = d.len();
    if k >= n {
        return Err(Error::InvalidArgument(format!("censoring {k} of {n} observations")));
    }
    let kept = &d[..n - k];
    let s = kept.iter().map(|&v| f64::from(v)).sum::<f64>() + k as f64 * f64::from(kept[n - k - 1]);
    let m = (n - k) as f64;
    Ok((s / (s + m), s / m))
}

/// Upper bound on the number of components from integer distances.
pub fn discrete_component_upper_bound(d: &[u32], params: &ClusterParams) -> Result<usize> {
    if d.len() <= params.k_max {
        return Err(Error::InsufficientSamples { n: d.len(), needed: params.k_max });
    }
    Ok(geometric_upper_bound(d, params.k_max, params.alpha))
}

fn geometric_upper_bound(d: &[u32], k_max: usize, alpha: f64) -> usize {
    let n = d.len();
    let mut sorted = d.to_vec();
    sorted.sort_unstable();
    let asf: Vec<f64> = sorted.iter().map(|&v| f64::from(v)).collect();
    let last = (k_max - 1).min(n);
    if last == 0 {
        return 1;
    }
    let theta = theta_ladder(&asf, last.min(n - 1) + 1);
    let mut best = 0;
    for k in 1..=last {
        // 1-based d_(n-k+1) and d_(n-k); with every distance censored the
        // distance-one floor of the space stands in for both d_(0) and theta
        let (hi, lo, th) = if k < n { (sorted[n - k], sorted[n - k - 1], theta[k]) } else { (sorted[0], 1, 1.0) };
        let gap = f64::from(hi.saturating_sub(lo));
        let gamma = if th > 0.0 {
            gap / th
        } else if gap > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if gamma > alpha && hi >= 2 {
            best = k;
        }
    }
    1 + best
}

/// States of one ring.
#[derive(Clone, Debug)]
pub enum Points<'a> {
    Continuous(Vec<&'a [f64]>),
    Discrete(Vec<&'a Segmentation>),
}

impl Points<'_> {
    pub fn len(&self) -> usize {
        match self {
            Points::Continuous(v) => v.len(),
            Points::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Distinct states with a map from every input item to its distinct state.
pub(crate) enum Unique {
    Continuous { dim: usize, coords: Vec<f64> },
    Discrete { len: u32, cps: Vec<Vec<u32>> },
}

impl Unique {
    pub(crate) fn build(points: &Points<'_>) -> (Unique, Vec<usize>, Vec<usize>) {
        let mut of_item = Vec::with_capacity(points.len());
        let mut first = Vec::new();
        match points {
            Points::Continuous(v) => {
                let dim = v.first().map_or(0, |x| x.len());
                let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(v.len());
                let mut coords = Vec::new();
                for (i, x) in v.iter().enumerate() {
                    let key: Vec<u64> = x.iter().map(|c| (c + 0.0).to_bits()).collect();
                    let next = seen.len();
                    let id = *seen.entry(key).or_insert_with(|| {
                        coords.extend_from_slice(x);
                        first.push(i);
                        next
                    });
                    of_item.push(id);
                }
                (Unique::Continuous { dim, coords }, of_item, first)
            }
            Points::Discrete(v) => {
                let len = v.first().map_or(0, |s| s.len);
                let mut seen: HashMap<&[u32], usize> = HashMap::with_capacity(v.len());
                let mut cps = Vec::new();
                for (i, s) in v.iter().enumerate() {
                    let next = seen.len();
                    let id = *seen.entry(&s.cps).or_insert_with(|| {
                        cps.push(s.cps.clone());
                        first.push(i);
                        next
                    });
                    of_item.push(id);
                }
                (Unique::Discrete { len, cps }, of_item, first)
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Unique::Continuous { dim, coords } => {
                if *dim == 0 {
                    0
                } else {
                    coords.len() / dim
                }
            }
            Unique::Discrete { cps, .. } => cps.len(),
        }
    }

    pub(crate) fn point(&self, i: usize) -> &[f64] {
        match self {
            Unique::Continuous { dim, coords } => &coords[i * dim..(i + 1) * dim],
            Unique::Discrete { .. } => unreachable!("segmentations have no coordinates"),
        }
    }

    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            Unique::Continuous { .. } => euclidean(self.point(i), self.point(j)),
            Unique::Discrete { len, cps } => f64::from(seg_distance(&cps[i], &cps[j], *len)),
        }
    }

    pub(crate) fn dendrogram(&self, exec: Exec) -> Dendrogram {
        single_linkage(self.len(), |i, j| self.dist(i, j), exec)
    }
}

/// What happened when a ring was partitioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingOutcome {
    /// Clusters over the input item indices.
    pub clusters: Vec<Cluster>,
    pub k_low: usize,
    pub k_high: usize,
    /// Number of splits attempted toward, i.e. `max(k_high, k_prev)` after caps.
    pub upper: usize,
    /// Splits kept only because of an energy wall along the boundary pair.
    pub rescued: usize,
    /// The ring had too few distinct states for the distance model.
    pub small: bool,
}

/// Splits one ring into clusters.
///
/// `k_prev` is the number of sublevel components below this ring. `rescue`
/// supplies the energy for interpolation rescue (continuous only, and only
/// when `params.interpolation` is set); `u_upper` is the ring's upper edge.
pub fn partition_ring(
    points: &Points<'_>,
    params: &ClusterParams,
    k_prev: usize,
    rescue: Option<&dyn EnergyFn>,
    u_upper: f64,
    exec: Exec,
) -> Result<RingOutcome> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("ring"));
    }
    let (unique, of_item, _) = Unique::build(points);
    let dendro = unique.dendrogram(exec);
    let mut weight = vec![0usize; unique.len()];
    for &u in &of_item {
        weight[u] += 1;
    }
    let (keep, outcome) = choose_merges(&unique, &dendro, &weight, params, k_prev, rescue, u_upper);
    let comps = dendro.components(|i| keep[i]);
    let mut slot = vec![0usize; unique.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &u in &comp.members {
            slot[u] = c;
        }
    }
    let mut clusters: Vec<Cluster> =
        comps.iter().map(|c| Cluster { members: Vec::new(), max_nnd: c.max_nnd }).collect();
    for (item, &u) in of_item.iter().enumerate() {
        clusters[slot[u]].members.push(item);
    }
    Ok(RingOutcome { clusters, ..outcome })
}

/// Decides which dendrogram merges stay applied.
fn choose_merges(
    unique: &Unique,
    dendro: &Dendrogram,
    weight: &[usize],
    params: &ClusterParams,
    k_prev: usize,
    rescue: Option<&dyn EnergyFn>,
    u_upper: f64,
) -> (Vec<bool>, RingOutcome) {
    let heights = dendro.heights();
    let n_merges = heights.len();
    let mut keep = vec![true; n_merges];
    let discrete = matches!(unique, Unique::Discrete { .. });

    let small = n_merges <= params.k_max;
    let (k_low, k_high) = if discrete {
        let d: Vec<u32> = heights.iter().map(|&h| h as u32).collect();
        (1, if n_merges == 0 { 1 } else { geometric_upper_bound(&d, params.k_max, params.alpha) })
    } else if small {
        if n_merges > 0 {
            warn!(
                "ring with {} distinct states is too small for the distance model; using one component",
                n_merges + 1
            );
        }
        (1, 1)
    } else {
        let dim = match unique {
            Unique::Continuous { dim, .. } => *dim,
            Unique::Discrete { .. } => 1,
        };
        let b = exponential_bounds(&heights, dim, params);
        (b.k_low, b.k_high)
    };

    // merges at distance 1 join neighbors in the segmentation space and can
    // never separate components
    let floor = if discrete { 1.0 } else { 0.0 };
    let splittable = 1 + heights.iter().filter(|&&h| h > floor).count();
    let k_low = k_low.min(splittable);
    let upper = k_high.max(k_prev).min(splittable).max(k_low);

    for rank in 0..k_low.saturating_sub(1) {
        keep[n_merges - 1 - rank] = false;
    }

    let use_rescue = params.interpolation && !discrete;
    let mut rescued = 0;
    for rank in k_low.saturating_sub(1)..upper.saturating_sub(1) {
        let idx = n_merges - 1 - rank;
        let m = &dendro.merges[idx];
        let smaller = sample_count(dendro, weight, m.left).min(sample_count(dendro, weight, m.right));
        if smaller > params.n_min {
            keep[idx] = false;
            continue;
        }
        if let (true, Some(energy)) = (use_rescue, rescue) {
            let wall =
                interpolate_max_energy(unique.point(m.pair.0), unique.point(m.pair.1), energy, params.interp_points);
            if wall > u_upper {
                keep[idx] = false;
                rescued += 1;
            }
        }
    }
    let outcome = RingOutcome { clusters: Vec::new(), k_low, k_high, upper, rescued, small };
    (keep, outcome)
}

/// Samples under a dendrogram node, counting repeats of a state.
fn sample_count(dendro: &Dendrogram, weight: &[usize], id: usize) -> usize {
    dendro.members(id).iter().map(|&u| weight[u]).sum()
}
