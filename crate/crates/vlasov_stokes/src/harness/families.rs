//! Analytic data families and their hypothesis checks.

use std::f64::consts::PI;

use crate::phase_fields::{moments, weighted_sup_norm};
use crate::{DistributionField, PhaseGrid};

use super::config::Family;

/// Unscaled samples of a family on `grid`.
pub fn sample_family(family: &Family, grid: PhaseGrid) -> DistributionField {
    match *family {
        Family::Zero => DistributionField::zeros(grid, 0.0),
        Family::Gaussian { sigma1, sigma2, mode, depth, phase } => DistributionField::from_fn(grid, 0.0, |x, v| {
            let g = (-v[0] * v[0] / (2.0 * sigma1 * sigma1) - v[1] * v[1] / (2.0 * sigma2 * sigma2)).exp();
            let arg = 2.0 * PI * (mode[0] as f64 * x[0] + mode[1] as f64 * x[1]) + phase;
            g * (1.0 + depth * arg.cos())
        }),
    }
}

/// `family` scaled so that `||(1+|v|)^{gamma+2} f||_inf = epsilon`.
pub fn scaled_to_weighted_norm(family: &Family, grid: PhaseGrid, gamma: f64, epsilon: f64) -> DistributionField {
    let mut f = sample_family(family, grid);
    let w = weighted_sup_norm(&f, gamma);
    if w > 0.0 {
        f.values.iter_mut().for_each(|a| *a *= epsilon / w);
    }
    f
}

/// `family` scaled to the given total mass (zero data stay zero).
pub fn scaled_to_mass(family: &Family, grid: PhaseGrid, mass: f64) -> DistributionField {
    let mut f = sample_family(family, grid);
    let m = moments(&f).mass;
    if m != 0.0 {
        f.values.iter_mut().for_each(|a| *a *= mass / m);
    }
    f
}

/// Measured hypotheses of the data.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DataReport {
    pub mass: f64,
    pub momentum: [f64; 2],
    pub weighted_norm: f64,
    /// Smallest `kappa` with `|f| <= kappa / (1+|v|)^{gamma+1}` on the grid.
    pub kappa: f64,
}

pub fn data_report(f: &DistributionField, gamma: f64) -> DataReport {
    let m = moments(f);
    DataReport {
        mass: m.mass,
        momentum: m.momentum,
        weighted_norm: weighted_sup_norm(f, gamma),
        kappa: weighted_sup_norm(f, gamma - 1.0),
    }
}
