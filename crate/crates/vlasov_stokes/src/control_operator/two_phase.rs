//! Composition of two half-horizon runs: `f0 -> 0` forwards and `f1 -> 0` for the time-reversed
//! system, glued at `T/2` after reversing the second run.

use crate::error::Result;
use crate::DistributionField;

use super::picard::{picard_iterate, sup_outside_omega, IterationState, OperatorContext};

/// `f(x, v) -> f(x, -v)`.
pub fn flip_velocity(f: &DistributionField) -> DistributionField {
    let g = f.grid;
    let nv = g.nv;
    let mut out = f.clone();
    for (dst, src) in out.values.chunks_mut(g.velocity_len()).zip(f.values.chunks(g.velocity_len())) {
        for j1 in 0..nv {
            for j2 in 0..nv {
                dst[j1 * nv + j2] = src[(nv - 1 - j1) * nv + (nv - 1 - j2)];
            }
        }
    }
    out
}

/// `f(t, x, v) -> f(T - t, x, -v)` on a stored series (reverses the order of the slices).
pub fn time_reverse(series: &[DistributionField], t_final: f64) -> Vec<DistributionField> {
    series
        .iter()
        .rev()
        .map(|f| {
            let mut g = flip_velocity(f);
            g.t = t_final - f.t;
            g
        })
        .collect()
}

/// Both half runs and the mismatch of the composition outside `omega`.
#[derive(Clone, Debug)]
pub struct TwoPhaseResult {
    pub phase_a: IterationState,
    pub phase_b: IterationState,
    pub half: f64,
    /// `sup` over `(T^2 \ omega) x R^2` of the jump of the composed state at `T/2`.
    pub junction_gap: f64,
    /// `sup` over `(T^2 \ omega) x R^2` of `|g(T) - f1|`.
    pub terminal_error: f64,
}

impl TwoPhaseResult {
    /// The composed perturbation on `[0, T]`: phase A, then phase B reversed (the junction slice
    /// is taken from phase A).
    pub fn composed(&self) -> Vec<DistributionField> {
        let mut out = self.phase_a.perturbation.clone();
        let rev = time_reverse(&self.phase_b.perturbation, self.half);
        out.extend(rev.into_iter().skip(1).map(|mut f| {
            f.t += self.half;
            f
        }));
        out
    }
}

/// Runs phase A with `ctx_a` (data `f0`) and phase B with `ctx_b`, whose data must be
/// `flip_velocity(f1)` and whose friction is the negated one; both on `[0, T/2]`.
pub fn solve_two_phase(ctx_a: &OperatorContext, ctx_b: &OperatorContext, f1: &DistributionField) -> Result<TwoPhaseResult> {
    let phase_a = picard_iterate(ctx_a).map_err(|e| e.at("phase A"))?;
    let phase_b = picard_iterate(ctx_b).map_err(|e| e.at("phase B"))?;
    let half = ctx_a.model.t_final;
    let region = &ctx_a.model.region;
    let end_a = phase_a.perturbation.last().expect("slices");
    let start_b = flip_velocity(phase_b.perturbation.last().expect("slices"));
    let mut jump = end_a.clone();
    for (a, b) in jump.values.iter_mut().zip(&start_b.values) {
        *a -= b;
    }
    let junction_gap = sup_outside_omega(&jump, region);
    let mut term = flip_velocity(&phase_b.perturbation[0]);
    for (a, b) in term.values.iter_mut().zip(&f1.values) {
        *a -= b;
    }
    let terminal_error = sup_outside_omega(&term, region);
    Ok(TwoPhaseResult { phase_a, phase_b, half, junction_gap, terminal_error })
}
