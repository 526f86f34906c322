//! The absorbing transport operator `Vtilde`: semi-Lagrangian steps between stored slices.

use rayon::prelude::*;

use crate::characteristics::{trace, FlowField, SlicedField, Window};
use crate::Integrator;
use crate::error::Result;
use crate::scalar::norm;
use crate::{DistributionField, PhaseGrid, VelocityField};
type Vec2 = crate::scalar::Vec2<f64>;

use super::absorption::AbsorptionModel;

/// `U^g = Ubar + deltaU`: the pulse windows of a base field plus a correction sampled on slices.
pub struct ControlField<'a> {
    pub base: &'a dyn FlowField<f64>,
    pub delta: SlicedField<f64>,
}

impl<'a> ControlField<'a> {
    pub fn new(base: &'a dyn FlowField<f64>, delta: Vec<VelocityField>) -> Self {
        Self { base, delta: SlicedField::new(delta) }
    }
}

impl FlowField<f64> for ControlField<'_> {
    fn eval(&self, t: f64, x: Vec2) -> Vec2 {
        let a = self.base.eval(t, x);
        if self.delta.slices.is_empty() {
            return a;
        }
        let b = self.delta.eval(t, x);
        [a[0] + b[0], a[1] + b[1]]
    }

    fn windows(&self) -> &[Window<f64>] {
        self.base.windows()
    }

    fn eval_window(&self, w: usize, sigma: f64, x: Vec2) -> Vec2 {
        self.base.eval_window(w, sigma, x)
    }
}

/// Numerical parameters of the transport step.
#[derive(Clone, Copy, Debug)]
pub struct TransportSettings {
    /// RK4 steps per slice interval outside windows.
    pub steps_per_interval: usize,
    /// RK4 steps per full pulse window.
    pub window_steps: usize,
    /// A backward trace is abandoned (value 0) once `|V|` exceeds `escape_factor * Vmax`.
    pub escape_factor: f64,
    pub friction: f64,
}

impl Default for TransportSettings {
    fn default() -> Self {
        Self { steps_per_interval: 16, window_steps: 8, escape_factor: 8.0, friction: 1.0 }
    }
}

impl TransportSettings {
    pub fn integrator(&self, dt: f64, r0: f64) -> Integrator {
        Integrator::fixed(dt, self.steps_per_interval)
            .guarded(r0 / 4.0, crate::characteristics::CoarseStep::Subdivide)
            .with_window_steps(self.window_steps)
            .with_friction(self.friction)
    }
}

/// Value carried from `(s, foot)` to `(t, x, v)`: the Jacobian `e^{2 lambda (t - s)}` times the
/// absorption factors met on the way; `None` when the characteristic escapes the box.
#[allow(clippy::too_many_arguments)]
fn backward_step(
    field: &dyn FlowField<f64>,
    integ: &Integrator,
    model: &AbsorptionModel,
    escape: f64,
    t: f64,
    s: f64,
    x: Vec2,
    v: Vec2,
) -> Result<Option<(Vec2, Vec2, f64)>> {
    let mut obs = |st: &crate::characteristics::StepInfo<f64>| norm(st.v1) <= escape;
    let tr = trace(field, integ, t, s, x, v, Some(&model.region), &mut obs)?;
    if tr.stopped_at.is_some() {
        return Ok(None);
    }
    let factor = tr.crossings.iter().fold(1.0, |p, c| p * model.crossing_factor(c));
    let jac = (2.0 * integ.friction * (t - s)).exp();
    Ok(Some((tr.x.as_vec(), tr.v, jac * factor)))
}

/// `Vtilde` on the slice times: `h(t_0) = f0` and, for every node of slice `k`, the value
/// carried back to slice `k - 1` and interpolated there.
pub fn apply_tilde_v(
    f0: &DistributionField,
    field: &dyn FlowField<f64>,
    model: &AbsorptionModel,
    times: &[f64],
    settings: &TransportSettings,
) -> Result<Vec<DistributionField>> {
    let grid = f0.grid;
    let mut out = Vec::with_capacity(times.len());
    let mut first = f0.clone();
    first.t = times[0];
    out.push(first);
    let escape = settings.escape_factor * grid.vmax;
    for k in 1..times.len() {
        let (s, t) = (times[k - 1], times[k]);
        let prev = &out[k - 1];
        let mut next = DistributionField::zeros(grid, t);
        if prev.sup_norm() > 0.0 {
            let integ = settings.integrator(t - s, model.region.r0);
            next.values
                .par_iter_mut()
                .enumerate()
                .try_for_each(|(idx, val)| -> Result<()> {
                    let (x, v) = grid.node(idx);
                    if let Some((xf, vf, w)) = backward_step(field, &integ, model, escape, t, s, x, v)? {
                        if w != 0.0 {
                            *val = w * prev.interpolate(xf, vf);
                        }
                    }
                    Ok(())
                })?;
        }
        out.push(next);
    }
    Ok(out)
}

/// `Vtilde` evaluated by one backward trace from each node to `t = 0`, without re-interpolation.
pub fn apply_tilde_v_direct(
    f0: &DistributionField,
    field: &dyn FlowField<f64>,
    model: &AbsorptionModel,
    times: &[f64],
    settings: &TransportSettings,
) -> Result<Vec<DistributionField>> {
    let grid: PhaseGrid = f0.grid;
    let escape = settings.escape_factor * grid.vmax;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            let mut f = f0.clone();
            f.t = 0.0;
            out.push(f);
            continue;
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { t };
        let integ = settings.integrator(dt, model.region.r0);
        let mut next = DistributionField::zeros(grid, t);
        next.values
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(idx, val)| -> Result<()> {
                let (x, v) = grid.node(idx);
                if let Some((xf, vf, w)) = backward_step(field, &integ, model, escape, t, 0.0, x, v)? {
                    *val = w * f0.interpolate(xf, vf);
                }
                Ok(())
            })?;
        out.push(next);
    }
    Ok(out)
}
