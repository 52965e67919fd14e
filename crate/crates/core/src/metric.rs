//! Distances and neighborhoods on the two kinds of state space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Segmentation, State};
use crate::EnergyFn;

/// The configuration space a sample set lives in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpaceKind {
    Continuous { lo: Vec<f64>, hi: Vec<f64> },
    Segmentation { len: u32, max_points: u32 },
}

impl SpaceKind {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(lo.len(), hi.len()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("domain box needs lo < hi on every axis".into()));
        }
        Ok(SpaceKind::Continuous { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn segmentation(len: u32, max_points: u32) -> Result<Self> {
        if max_points >= len {
            return Err(Error::InvalidArgument(format!("need N < L, got N={max_points}, L={len}")));
        }
        Ok(SpaceKind::Segmentation { len, max_points })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SpaceKind::Segmentation { .. })
    }

    /// Dimension of the NND model: `p` for boxes, 1 for segmentations
    /// (the geometric model does not use it).
    pub fn dim(&self) -> usize {
        match self {
            SpaceKind::Continuous { lo, .. } => lo.len(),
            SpaceKind::Segmentation { .. } => 1,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SpaceKind::Continuous { lo, hi } => {
                x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
            }
            SpaceKind::Segmentation { .. } => false,
        }
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    Ok(euclidean(a, b))
}

/// Unchecked Euclidean distance for hot loops.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_euclidean(a, b).sqrt()
}

#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Number of positions that fall into unmatched parts of the segments under
/// the best one-to-one matching of segments of `z` to segments of `x`.
pub fn segmentation_distance(z: &Segmentation, x: &Segmentation) -> Result<u32> {
    if z.len != x.len {
        return Err(Error::LengthMismatch(z.len, x.len));
    }
    Ok(seg_distance(&z.cps, &x.cps, z.len))
}

/// Segmentation distance on raw change-point lists of a common length.
pub fn seg_distance(z: &[u32], x: &[u32], len: u32) -> u32 {
    if z == x {
        return 0;
    }
    let q = x.len();
    // best[j]: optimal overlap of the segments seen so far of z against the
    // first j segments of x
    let mut buf = [0u32; 64];
    let mut heap;
    let best: &mut [u32] = if q + 2 <= buf.len() {
        &mut buf[..q + 2]
    } else {
        heap = vec![0u32; q + 2];
        &mut heap
    };
    let bound = |cps: &[u32], k: usize| -> u32 {
        if k == 0 {
            1
        } else if k > cps.len() {
            len + 1
        } else {
            cps[k - 1]
        }
    };
    for i in 0..=z.len() {
        let (s, e) = (bound(z, i), bound(z, i + 1));
        let mut diag = 0;
        for j in 0..=q {
            let (t, f) = (bound(x, j), bound(x, j + 1));
            let overlap = e.min(f).saturating_sub(s.max(t));
            let up = best[j + 1];
            let v = up.max(best[j]).max(diag + overlap);
            diag = up;
            best[j + 1] = v;
        }
    }
    len - best[q + 1]
}

/// All valid segmentations at distance exactly one from `z`.
pub fn neighbors_distance_one(z: &Segmentation) -> Vec<Segmentation> {
    let cps = &z.cps;
    let p = cps.len();
    let len = z.len;
    let lower = |i: usize| if i == 0 { 1 } else { cps[i - 1] };
    let upper = |i: usize| if i >= p { len + 1 } else { cps[i] };
    let mut out: Vec<Vec<u32>> = Vec::new();

    for i in 0..p {
        let prev = lower(i);
        let next = if i + 1 < p { cps[i + 1] } else { len + 1 };
        if cps[i] - 1 > prev {
            let mut c = cps.clone();
            c[i] -= 1;
            out.push(c);
        }
        if cps[i] + 1 < next {
            let mut c = cps.clone();
            c[i] += 1;
            out.push(c);
        }
    }
    if p < z.max_points as usize {
        for k in 0..=p {
            let (s, e) = (lower(k), upper(k));
            if e - s >= 2 {
                for cut in [s + 1, e - 1] {
                    let mut c = cps.clone();
                    c.insert(k, cut);
                    out.push(c);
                }
            }
        }
    }
    for i in 0..p {
        let left_len = cps[i] - lower(i);
        let right_len = upper(i + 1) - cps[i];
        if left_len == 1 || right_len == 1 {
            let mut c = cps.clone();
            c.remove(i);
            out.push(c);
        }
    }
    out.sort();
    out.dedup();
    out.into_iter().map(|cps| Segmentation { cps, len, max_points: z.max_points }).collect()
}

/// Largest energy among `n_points` equally spaced points on the segment from
/// `a` to `b`, endpoints included.
pub fn interpolate_max_energy<E: EnergyFn + ?Sized>(a: &[f64], b: &[f64], energy: &E, n_points: usize) -> f64 {
    let n = n_points.max(2);
    let denom = (n - 1) as f64;
    let mut x = vec![0.0; a.len()];
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let (wa, wb) = ((n - 1 - i) as f64, i as f64);
        for (k, v) in x.iter_mut().enumerate() {
            *v = (a[k] * wa + b[k] * wb) / denom;
        }
        best = best.max(energy.energy(&x));
    }
    best
}

/// Distance between two states of the same kind.
pub fn state_distance(a: &State, b: &State) -> Result<f64> {
    match (a, b) {
        (State::Continuous(x), State::Continuous(y)) => euclidean_distance(x, y),
        (State::Discrete(z), State::Discrete(x)) => segmentation_distance(z, x).map(f64::from),
        _ => Err(Error::MixedStates),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(cps: &[u32], len: u32, n: u32) -> Segmentation {
        Segmentation::new(cps.to_vec(), len, n).unwrap()
    }

    /// All segmentations of length `len` with at most `n` change points.
    fn all_segs(len: u32, n: u32) -> Vec<Segmentation> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: u32, len: u32, n: u32, cur: &mut Vec<u32>, out: &mut Vec<Segmentation>) {
            out.push(Segmentation { cps: cur.clone(), len, max_points: n });
            if cur.len() as u32 == n {
                return;
            }
            for z in start..=len {
                cur.push(z);
                rec(z + 1, len, n, cur, out);
                cur.pop();
            }
        }
        rec(2, len, n, &mut cur, &mut out);
        out
    }

    /// Maximum overlap over every one-to-one partial map between segments.
    fn brute_distance(z: &Segmentation, x: &Segmentation) -> u32 {
        let a: Vec<_> = z.segments().collect();
        let b: Vec<_> = x.segments().collect();
        fn rec(i: usize, a: &[(u32, u32)], b: &[(u32, u32)], used: &mut Vec<bool>) -> u32 {
            if i == a.len() {
                return 0;
            }
            let mut best = rec(i + 1, a, b, used);
            for j in 0..b.len() {
                if !used[j] {
                    let ov = a[i].1.min(b[j].1).saturating_sub(a[i].0.max(b[j].0));
                    used[j] = true;
                    best = best.max(ov + rec(i + 1, a, b, used));
                    used[j] = false;
                }
            }
            best
        }
        z.len - rec(0, &a, &b, &mut vec![false; b.len()])
    }

    #[test]
    fn euclid_examples() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(euclidean_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn worked_segmentation_example() {
        assert_eq!(segmentation_distance(&seg(&[3, 9], 10, 2), &seg(&[8], 10, 2)).unwrap(), 3);
        assert_eq!(segmentation_distance(&seg(&[], 10, 2), &seg(&[6], 10, 2)).unwrap(), 5);
        assert_eq!(segmentation_distance(&seg(&[4, 7], 10, 2), &seg(&[4, 7], 10, 2)).unwrap(), 0);
        assert!(segmentation_distance(&seg(&[], 10, 2), &seg(&[], 9, 2)).is_err());
    }

    #[test]
    fn dp_matches_brute_force_exhaustively() {
        let all = all_segs(8, 3);
        for a in &all {
            for b in &all {
                let d = segmentation_distance(a, b).unwrap();
                assert_eq!(d, brute_distance(a, b), "{:?} {:?}", a.cps, b.cps);
                assert_eq!(d, segmentation_distance(b, a).unwrap());
                assert_eq!(d == 0, a == b);
            }
        }
    }

    #[test]
    fn neighbor_examples() {
        let got: Vec<_> = neighbors_distance_one(&seg(&[3], 4, 2)).into_iter().map(|s| s.cps).collect();
        assert_eq!(got, vec![vec![2], vec![2, 3], vec![3, 4], vec![4]]);
        let got: Vec<_> = neighbors_distance_one(&seg(&[], 2, 1)).into_iter().map(|s| s.cps).collect();
        assert_eq!(got, vec![vec![2]]);
    }

    #[test]
    fn neighbors_complete_and_sound() {
        for len in 2..=10u32 {
            for n in 1..=3u32.min(len - 1) {
                let all = all_segs(len, n);
                for z in &all {
                    let mut want: Vec<_> = all.iter().filter(|x| brute_distance(z, x) == 1).cloned().collect();
                    want.sort();
                    assert_eq!(neighbors_distance_one(z), want, "L={len} N={n} Z={:?}", z.cps);
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let sq = |x: &[f64]| x[0] * x[0];
        assert_eq!(interpolate_max_energy(&[-1.0], &[1.0], &sq, 101), 1.0);
        assert_eq!(interpolate_max_energy(&[0.3], &[0.3], &sq, 101), 0.09);
        let c = |x: &[f64]| -(std::f64::consts::PI * x[0]).cos();
        assert!((interpolate_max_energy(&[0.0], &[2.0], &c, 101) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn euclid_symmetric(a in prop::collection::vec(-1e3..1e3f64, 5), b in prop::collection::vec(-1e3..1e3f64, 5)) {
            prop_assert_eq!(euclidean(&a, &b).to_bits(), euclidean(&b, &a).to_bits());
        }

        #[test]
        fn seg_distance_matches_enumeration(
            len in 2u32..=12,
            za in prop::collection::btree_set(2u32..=12, 0..5),
            xa in prop::collection::btree_set(2u32..=12, 0..5),
        ) {
            let z: Vec<u32> = za.into_iter().filter(|&v| v <= len).collect();
            let x: Vec<u32> = xa.into_iter().filter(|&v| v <= len).collect();
            let z = Segmentation { cps: z, len, max_points: 11 };
            let x = Segmentation { cps: x, len, max_points: 11 };
            let d = segmentation_distance(&z, &x).unwrap();
            prop_assert_eq!(d, brute_distance(&z, &x));
            prop_assert_eq!(d, segmentation_distance(&x, &z).unwrap());
            prop_assert_eq!(d == 0, z == x);
        }

        #[test]
        fn interpolation_swap_invariant(a in -3.0..3.0f64, b in -3.0..3.0f64, n in 2usize..200) {
            let h = |x: &[f64]| (3.0 * x[0]).sin() + 0.1 * x[0] * x[0];
            prop_assert_eq!(
                interpolate_max_energy(&[a], &[b], &h, n).to_bits(),
                interpolate_max_energy(&[b], &[a], &h, n).to_bits()
            );
        }
    }
}
