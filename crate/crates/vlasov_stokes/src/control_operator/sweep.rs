//! Forward sweep checking that characteristics of `U^g` meet `gamma^{3-}` in `[T/24, 23T/24]`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::characteristics::{trace, FlowField, StepInfo};
use crate::Integrator;
use crate::error::Result;
use crate::scalar::norm;
use crate::torus_geometry::{first_ball_hit, ControlRegion};
type Vec2 = crate::scalar::Vec2<f64>;

/// Passed / total counts of a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Gamma3Stats {
    pub passed: usize,
    pub total: usize,
}

impl Gamma3Stats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

/// Radius of the concentric ball whose chords meet `S(x0, r0)` with `|<v, nu>| >= |v| / 5`.
fn steep_radius(r0: f64) -> f64 {
    r0 * (1.0 - 0.04f64).sqrt() * (1.0 - 1e-9)
}

/// Longest chord tested per step: very fast steps are truncated, later steps continue the search.
const MAX_CHORD: f64 = 64.0;

/// Whether one step enters `S(x0, r0)` steeply with speed at least 2 inside `[t_lo, t_hi]`.
fn step_hits(st: &StepInfo<f64>, region: &ControlRegion<f64>, t_lo: f64, t_hi: f64) -> bool {
    let d = [st.x1[0] - st.x0[0], st.x1[1] - st.x0[1]];
    let len = norm(d);
    let scale = if len > MAX_CHORD { MAX_CHORD / len } else { 1.0 };
    let dd = [d[0] * scale, d[1] * scale];
    let Some(s) = first_ball_hit(st.x0, dd, region.x0.as_vec(), steep_radius(region.r0)) else {
        return false;
    };
    let s = s * scale;
    let t = st.t0 + s * (st.t1 - st.t0);
    let v = [st.v0[0] + s * (st.v1[0] - st.v0[0]), st.v0[1] + s * (st.v1[1] - st.v0[1])];
    t >= t_lo && t <= t_hi && norm(v) >= 2.0
}

/// Samples `x` uniformly on the torus and `v` uniformly in the disc of radius `vmax`.
pub fn forward_samples(vmax: f64, count: usize, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let r = vmax * rng.gen::<f64>().sqrt();
            let a = rng.gen::<f64>() * 2.0 * PI;
            (x, [r * a.cos(), r * a.sin()])
        })
        .collect()
}

/// Traces every sample forward on `[0, T]` and counts those meeting `gamma^{3-}` in
/// `[T/24, 23T/24]`. Entries are detected on straight chords of the steps.
pub fn gamma3_sweep(
    field: &dyn FlowField<f64>,
    integ: &Integrator,
    region: &ControlRegion<f64>,
    t_final: f64,
    samples: &[(Vec2, Vec2)],
) -> Result<Gamma3Stats> {
    let (lo, hi) = (t_final / 24.0, 23.0 * t_final / 24.0);
    let passed = samples
        .par_iter()
        .map(|&(x, v)| -> Result<bool> {
            let mut hit = false;
            let mut obs = |st: &StepInfo<f64>| {
                if st.t0 > hi {
                    return false;
                }
                hit = step_hits(st, region, lo, hi);
                !hit
            };
            trace(field, integ, 0.0, t_final, x, v, None, &mut obs)?;
            Ok(hit)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Gamma3Stats { passed: passed.iter().filter(|&&p| p).count(), total: samples.len() })
}
