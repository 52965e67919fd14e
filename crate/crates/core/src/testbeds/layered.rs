//! Separable 4-D energy with layered minima.
//!
//! Each coordinate sees `g(t) = t^2 + 2(1 - cos 2 pi t)` on `[-1.5, 1.5]`:
//! a global well at 0 and two side wells at `+-t*`. A minimum with `j - 1`
//! coordinates in side wells belongs to layer `j`, so layer `j` holds
//! `C(4, j-1) 2^(j-1)` minima at energy `(j - 1) g(t*)`.

use std::f64::consts::PI;

use crate::metric::SpaceKind;
use crate::EnergyFn;

pub const DIM: usize = 4;
pub const BOUND: f64 = 1.5;

pub fn g(t: f64) -> f64 {
    t * t + 2.0 * (1.0 - (2.0 * PI * t).cos())
}

fn dg(t: f64) -> f64 {
    2.0 * t + 4.0 * PI * (2.0 * PI * t).sin()
}

fn d2g(t: f64) -> f64 {
    2.0 + 8.0 * PI * PI * (2.0 * PI * t).cos()
}

/// Root of `g'` in `[a, b]` (sign change required) by Newton steps kept
/// inside a shrinking bracket.
fn stationary_point(mut a: f64, mut b: f64) -> f64 {
    let fa = dg(a);
    assert!(fa * dg(b) < 0.0, "bracket must straddle a root");
    let mut t = 0.5 * (a + b);
    for _ in 0..200 {
        let f = dg(t);
        if f == 0.0 {
            break;
        }
        if (f < 0.0) == (fa < 0.0) {
            a = t;
        } else {
            b = t;
        }
        let newton = t - f / d2g(t);
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    t
}

/// The separable test energy; `+inf` outside `[-1.5, 1.5]^4`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Layered;

pub fn layered_multimodal_energy(x: &[f64]) -> f64 {
    if x.iter().any(|v| v.abs() > BOUND) {
        return f64::INFINITY;
    }
    x.iter().map(|&t| g(t)).sum()
}

impl EnergyFn for Layered {
    fn energy(&self, x: &[f64]) -> f64 {
        layered_multimodal_energy(x)
    }
}

impl Layered {
    pub fn space() -> SpaceKind {
        SpaceKind::cube(DIM, -BOUND, BOUND).expect("valid box")
    }

    /// Positive side-well minimizer `t*`.
    pub fn well_position() -> f64 {
        stationary_point(0.75, 1.25)
    }

    /// Positive saddle between the central and the side well.
    pub fn saddle_position() -> f64 {
        stationary_point(0.25, 0.75)
    }

    pub fn well_energy() -> f64 {
        g(Self::well_position())
    }

    pub fn saddle_energy() -> f64 {
        g(Self::saddle_position())
    }

    /// Energy of every minimum in layer `j` (1-based).
    pub fn layer_energy(j: usize) -> f64 {
        (j - 1) as f64 * Self::well_energy()
    }

    /// Barrier separating a layer-`j` minimum from its layer `j - 1`
    /// neighbors, `j >= 2`.
    pub fn layer_barrier(j: usize) -> f64 {
        (j - 2) as f64 * Self::well_energy() + Self::saddle_energy()
    }

    /// All minima of layer `j`.
    pub fn layer_minima(j: usize) -> Vec<Vec<f64>> {
        let w = Self::well_position();
        let mut out = Vec::new();
        for code in 0..3usize.pow(DIM as u32) {
            let mut c = code;
            let x: Vec<f64> = (0..DIM)
                .map(|_| {
                    let d = c % 3;
                    c /= 3;
                    [0.0, w, -w][d]
                })
                .collect();
            if x.iter().filter(|&&v| v != 0.0).count() == j - 1 {
                out.push(x);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        out
    }

    /// Layer of the basin containing `x`: one plus the number of
    /// coordinates past the saddle.
    pub fn layer_of(x: &[f64]) -> usize {
        let s = Self::saddle_position();
        1 + x.iter().filter(|v| v.abs() > s).count()
    }
}
