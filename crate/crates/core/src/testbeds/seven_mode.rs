//! Seven-mode 2-D Gaussian mixture: one broad dominant mode and two tight
//! triangles of three modes each.

use std::f64::consts::PI;

use crate::metric::SpaceKind;
use crate::EnergyFn;

pub const BOX: f64 = 8.0;

/// `(center x, center y, weight, sd)` per mode, numbered 1..=7.
pub const MODES: [(f64, f64, f64, f64); 7] = [
    (0.0, 0.0, 0.40, 0.8),
    (-3.0, 5.1547, 0.11, 0.6),
    (-4.0, 3.4226, 0.10, 0.6),
    (-2.0, 3.4226, 0.09, 0.6),
    (3.0, 5.1547, 0.105, 0.6),
    (2.0, 3.4226, 0.10, 0.6),
    (4.0, 3.4226, 0.095, 0.6),
];

#[derive(Clone, Copy, Debug, Default)]
pub struct SevenMode;

pub fn seven_mode_energy(x: &[f64]) -> f64 {
    let f: f64 = MODES
        .iter()
        .map(|&(cx, cy, w, s)| {
            let d2 = (x[0] - cx).powi(2) + (x[1] - cy).powi(2);
            w / (2.0 * PI * s * s) * (-0.5 * d2 / (s * s)).exp()
        })
        .sum();
    -f.ln()
}

impl EnergyFn for SevenMode {
    fn energy(&self, x: &[f64]) -> f64 {
        seven_mode_energy(x)
    }
}

impl SevenMode {
    pub fn space() -> SpaceKind {
        SpaceKind::cube(2, -BOX, BOX).expect("valid box")
    }

    pub fn centers() -> Vec<[f64; 2]> {
        MODES.iter().map(|&(x, y, _, _)| [x, y]).collect()
    }
}
