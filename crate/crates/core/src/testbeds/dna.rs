//! Simulated sequences and discrete local-minimum checks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::metric::neighbors_distance_one;
use crate::model::{seeded_rng, Segmentation};
use crate::samplers::dp::SegmentModel;

pub const TRUE_CHANGE_POINTS: [u32; 4] = [201, 401, 601, 801];

/// Letter probabilities of the five simulated segments: segment `i < 4`
/// favors letter `i` (0.4 against 0.2 for the others), the last is uniform.
pub fn reference_theta() -> Vec<[f64; 4]> {
    let mut rows: Vec<[f64; 4]> = (0..4)
        .map(|i| {
            let mut r = [0.2; 4];
            r[i] = 0.4;
            r
        })
        .collect();
    rows.push([0.25; 4]);
    rows
}

/// Draws a sequence of length `len` whose segment `k` (between consecutive
/// change points) has i.i.d. letters from `theta[k]`.
pub fn simulate_sequence(len: u32, change_points: &[u32], theta: &[[f64; 4]], seed: u64) -> Result<Vec<u8>> {
    let z = Segmentation::new(change_points.to_vec(), len, change_points.len() as u32)?;
    if theta.len() != change_points.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} change points need {} probability rows, got {}",
            change_points.len(),
            change_points.len() + 1,
            theta.len()
        )));
    }
    for (k, row) in theta.iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probability row {k} must be nonnegative and sum to 1")));
        }
    }
    let mut rng = seeded_rng(seed, 0);
    let mut out = Vec::with_capacity(len as usize);
    for ((start, end), row) in z.segments().zip(theta) {
        for _ in start..end {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut letter = 3;
            for (j, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    letter = j;
                    break;
                }
            }
            out.push(letter as u8);
        }
    }
    Ok(out)
}

/// True iff every distance-one neighbor has strictly higher energy.
pub fn verify_local_minimum(z: &Segmentation, model: &SegmentModel) -> Result<bool> {
    let h = model.energy(z)?;
    for x in neighbors_distance_one(z) {
        if model.energy(&x)? <= h {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Steepest descent over distance-one moves; among equally low neighbors
/// the lexicographically smallest change-point list wins.
pub fn neighbor_descent(z: &Segmentation, model: &SegmentModel) -> Result<Segmentation> {
    let mut cur = z.clone();
    let mut h = model.energy(&cur)?;
    loop {
        let mut best: Option<(f64, Segmentation)> = None;
        for x in neighbors_distance_one(&cur) {
            let e = model.energy(&x)?;
            let better = match &best {
                None => true,
                Some((be, bx)) => e < *be || (e == *be && x.cps < bx.cps),
            };
            if better {
                best = Some((e, x));
            }
        }
        match best {
            Some((e, x)) if e < h => {
                cur = x;
                h = e;
            }
            _ => return Ok(cur),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::dp::{parse_sequence, UNIFORM_DIRICHLET};

    #[test]
    fn degenerate_rows_and_boundaries() {
        let theta = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let s = simulate_sequence(10, &[6], &theta, 3).unwrap();
        assert_eq!(s, vec![0, 0, 0, 0, 0, 3, 3, 3, 3, 3]);
        assert!(simulate_sequence(10, &[6], &theta[..1], 3).is_err());
        assert!(simulate_sequence(10, &[6], &[[0.5; 4], [0.25; 4]], 3).is_err());
        assert_eq!(simulate_sequence(50, &[20], &theta, 9).unwrap(), simulate_sequence(50, &[20], &theta, 9).unwrap());
    }

    #[test]
    fn letter_frequencies() {
        // pooled over seeds so each segment sees 4000 letters
        let theta = reference_theta();
        let z = Segmentation::new(TRUE_CHANGE_POINTS.to_vec(), 1000, 4).unwrap();
        let mut counts = [[0usize; 4]; 5];
        for seed in 0..20 {
            let s = simulate_sequence(1000, &TRUE_CHANGE_POINTS, &theta, seed).unwrap();
            for (k, (a, b)) in z.segments().enumerate() {
                for &c in &s[(a - 1) as usize..(b - 1) as usize] {
                    counts[k][c as usize] += 1;
                }
            }
        }
        for (k, row) in theta.iter().enumerate() {
            let n: usize = counts[k].iter().sum();
            assert_eq!(n, 4000);
            for j in 0..4 {
                let f = counts[k][j] as f64 / n as f64;
                let se = (row[j] * (1.0 - row[j]) / n as f64).sqrt();
                assert!((f - row[j]).abs() < 3.0 * se, "segment {k}, letter {j}: {f}");
            }
        }
    }

    #[test]
    fn descent_ends_at_verified_minimum() {
        let seq = parse_sequence("aaaaaaacccccccgggggg").unwrap();
        let model = SegmentModel::new(seq, 3, UNIFORM_DIRICHLET).unwrap();
        for start in [vec![], vec![3], vec![5, 12], vec![2, 10, 19]] {
            let z = Segmentation::new(start, 20, 3).unwrap();
            let m = neighbor_descent(&z, &model).unwrap();
            assert!(verify_local_minimum(&m, &model).unwrap());
            assert_eq!(neighbor_descent(&m, &model).unwrap(), m);
        }
    }
}
