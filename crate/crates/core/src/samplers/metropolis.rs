use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::SpaceKind;
use crate::model::{seeded_rng, Sample, State};
use crate::EnergyFn;

/// One tempered (optionally truncated) random-walk chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub chain_id: u32,
    pub temperature: f64,
    /// Target `exp(-max(h, H) / T)`; `None` leaves `h` untouched.
    pub truncation: Option<f64>,
    pub steps: usize,
    pub burn_in: f64,
    /// Half-width of the uniform proposal box.
    pub sigma: f64,
    pub seed: u64,
    pub init: Vec<f64>,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("chain {}: temperature must be positive", self.chain_id)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument(format!("chain {}: steps must be positive", self.chain_id)));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidArgument(format!("chain {}: burn-in fraction must be in [0, 1)", self.chain_id)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("chain {}: proposal scale must be positive", self.chain_id)));
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in * self.steps as f64).floor() as usize
    }
}

/// Default proposal half-width, `0.1 * sqrt(T) * width`.
pub fn default_sigma(temperature: f64, width: f64) -> f64 {
    0.1 * temperature.sqrt() * width
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRun {
    pub samples: Vec<Sample>,
    pub accepted: usize,
    pub proposed: usize,
}

impl ChainRun {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Reflects `v` into `[lo, hi]`.
fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if v < lo || v > hi {
        let period = 2.0 * w;
        let mut r = (v - lo) % period;
        if r < 0.0 {
            r += period;
        }
        v = if r <= w { lo + r } else { hi - (r - w) };
    }
    v
}

#[inline]
pub(crate) fn truncated(h: f64, truncation: Option<f64>) -> f64 {
    match truncation {
        Some(t) => h.max(t),
        None => h,
    }
}

/// Live state of one chain.
pub(crate) struct Walker {
    pub spec: ChainSpec,
    pub x: Vec<f64>,
    pub h: f64,
    pub rng: ChaCha8Rng,
    pub accepted: usize,
    pub proposed: usize,
    pub step: usize,
    proposal: Vec<f64>,
}

impl Walker {
    pub fn new<E: EnergyFn + ?Sized>(energy: &E, space: &SpaceKind, spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        if !space.contains(&spec.init) {
            return Err(Error::OutOfDomain(format!("chain {} starts outside the domain", spec.chain_id)));
        }
        let h = energy.energy(&spec.init);
        if !h.is_finite() {
            return Err(Error::OutOfDomain(format!("chain {} starts at infinite energy", spec.chain_id)));
        }
        Ok(Walker {
            x: spec.init.clone(),
            h,
            rng: seeded_rng(spec.seed, u64::from(spec.chain_id)),
            accepted: 0,
            proposed: 0,
            step: 0,
            proposal: vec![0.0; spec.init.len()],
            spec: spec.clone(),
        })
    }

    /// Advances `n` steps, pushing post-burn-in states to `out`.
    pub fn advance<E: EnergyFn + ?Sized>(&mut self, energy: &E, space: &SpaceKind, n: usize, out: &mut Vec<Sample>) {
        let SpaceKind::Continuous { lo, hi } = space else { unreachable!("random walks run on boxes") };
        let (t, trunc, sigma) = (self.spec.temperature, self.spec.truncation, self.spec.sigma);
        let burn = self.spec.burn_in_steps();
        for _ in 0..n {
            for k in 0..self.x.len() {
                let v = self.x[k] + sigma * (2.0 * self.rng.random::<f64>() - 1.0);
                self.proposal[k] = reflect(v, lo[k], hi[k]);
            }
            let u: f64 = self.rng.random();
            let h_new = energy.energy(&self.proposal);
            self.proposed += 1;
            if h_new.is_finite() {
                let delta = truncated(h_new, trunc) - truncated(self.h, trunc);
                if delta <= 0.0 || u < (-delta / t).exp() {
                    self.x.copy_from_slice(&self.proposal);
                    self.h = h_new;
                    self.accepted += 1;
                }
            }
            if self.step >= burn {
                out.push(self.sample());
            }
            self.step += 1;
        }
    }

    pub fn sample(&self) -> Sample {
        Sample {
            chain_id: self.spec.chain_id,
            temperature: self.spec.temperature,
            truncation: self.spec.truncation,
            energy: self.h,
            state: State::Continuous(self.x.clone()),
        }
    }
}

/// Random-walk Metropolis on a box with a uniform proposal and reflection
/// at the bounds. Emits the current state after every post-burn-in step.
pub fn metropolis_chain<E: EnergyFn + ?Sized>(energy: &E, space: &SpaceKind, spec: &ChainSpec) -> Result<ChainRun> {
    let mut w = Walker::new(energy, space, spec)?;
    let mut samples = Vec::with_capacity(spec.steps - spec.burn_in_steps());
    w.advance(energy, space, spec.steps, &mut samples);
    Ok(ChainRun { samples, accepted: w.accepted, proposed: w.proposed })
}

/// `h` restricted to a ball and capped: `+inf` outside
/// `{|x - center| <= radius, h(x) < cap}`.
pub struct Restricted<'a, E: ?Sized> {
    pub inner: &'a E,
    pub center: Vec<f64>,
    pub radius: f64,
    pub cap: f64,
}

pub fn restrict_energy<E: EnergyFn + ?Sized>(
    energy: &E,
    center: Vec<f64>,
    radius: f64,
    cap: f64,
) -> Result<Restricted<'_, E>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("restriction radius must be positive".into()));
    }
    Ok(Restricted { inner: energy, center, radius, cap })
}

impl<E: EnergyFn + ?Sized> EnergyFn for Restricted<'_, E> {
    fn energy(&self, x: &[f64]) -> f64 {
        if crate::metric::sq_euclidean(x, &self.center) > self.radius * self.radius {
            return f64::INFINITY;
        }
        let h = self.inner.energy(x);
        if h < self.cap {
            h
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: f64, steps: usize, sigma: f64, init: Vec<f64>) -> ChainSpec {
        ChainSpec { chain_id: 0, temperature: t, truncation: None, steps, burn_in: 0.1, sigma, seed: 17, init }
    }

    #[test]
    fn flat_target_always_accepts() {
        let space = SpaceKind::cube(2, -1.0, 1.0).unwrap();
        let run = metropolis_chain(&|_: &[f64]| 3.0, &space, &spec(1.0, 5000, 0.7, vec![0.0, 0.0])).unwrap();
        assert_eq!(run.acceptance(), 1.0);
        assert_eq!(run.samples.len(), 4500);
        assert!(run.samples.iter().all(|s| space.contains(s.state.coords().unwrap())));
    }

    #[test]
    fn gaussian_variance() {
        let space = SpaceKind::cube(1, -12.0, 12.0).unwrap();
        let run =
            metropolis_chain(&|x: &[f64]| 0.5 * x[0] * x[0], &space, &spec(1.0, 200_000, 2.5, vec![0.0])).unwrap();
        let xs: Vec<f64> = run.samples.iter().map(|s| s.state.coords().unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn minus_infinity_truncation_is_no_truncation() {
        let space = SpaceKind::cube(2, -3.0, 3.0).unwrap();
        let h = |x: &[f64]| x[0] * x[0] + (x[1] - 1.0).powi(2);
        let a = metropolis_chain(&h, &space, &spec(0.7, 3000, 0.5, vec![0.1, 0.2])).unwrap();
        let mut s = spec(0.7, 3000, 0.5, vec![0.1, 0.2]);
        s.truncation = Some(f64::NEG_INFINITY);
        let b = metropolis_chain(&h, &space, &s).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
            assert_eq!(x.state, y.state);
        }
        let again = metropolis_chain(&h, &space, &spec(0.7, 3000, 0.5, vec![0.1, 0.2])).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn truncation_flattens_below_level() {
        let space = SpaceKind::cube(1, -2.0, 2.0).unwrap();
        let mut s = spec(0.05, 20_000, 0.3, vec![0.0]);
        s.truncation = Some(10.0);
        let run = metropolis_chain(&|x: &[f64]| x[0] * x[0], &space, &s).unwrap();
        assert_eq!(run.acceptance(), 1.0);
    }

    #[test]
    fn invalid_starts() {
        let space = SpaceKind::cube(1, 0.0, 1.0).unwrap();
        assert!(metropolis_chain(&|_: &[f64]| 0.0, &space, &spec(1.0, 10, 0.1, vec![2.0])).is_err());
        assert!(metropolis_chain(&|_: &[f64]| f64::INFINITY, &space, &spec(1.0, 10, 0.1, vec![0.5])).is_err());
        assert!(metropolis_chain(&|_: &[f64]| 0.0, &space, &spec(-1.0, 10, 0.1, vec![0.5])).is_err());
    }

    #[test]
    fn reflection_stays_in_box() {
        for v in [-5.3, -0.2, 0.4, 1.7, 9.9] {
            let r = reflect(v, 0.0, 1.0);
            assert!((0.0..=1.0).contains(&r));
        }
        assert!((reflect(1.2, 0.0, 1.0) - 0.8).abs() < 1e-15);
        assert!((reflect(-0.3, 0.0, 1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn restriction() {
        let h = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let r = restrict_energy(&h, vec![1.0, 0.0], 0.5, 2.0).unwrap();
        assert_eq!(r.energy(&[1.0, 0.0]), 1.0);
        assert_eq!(r.energy(&[1.0, 0.6]), f64::INFINITY);
        assert!((r.energy(&[1.4, 0.0]) - 1.96).abs() < 1e-12);
        assert!(restrict_energy(&h, vec![0.0, 0.0], 0.0, 1.0).is_err());

        let space = SpaceKind::cube(2, -3.0, 3.0).unwrap();
        let run = metropolis_chain(&r, &space, &spec(5.0, 20_000, 0.3, vec![1.0, 0.0])).unwrap();
        assert!(run.samples.iter().all(|s| s.energy < 2.0));
    }
}
