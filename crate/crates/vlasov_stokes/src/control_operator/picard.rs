//! The operator `V_eps[g] = fbar + Pi(Vtilde[g])`, its Picard iteration and the membership
//! diagnostics of the iteration set.

use rayon::prelude::*;

use crate::characteristics::FlowField;
use crate::error::{Error, Result};
use crate::phase_fields::{holder_seminorm, holder_seminorm_series, moments, weighted_sup_norm, Axis};
use crate::reference_trajectory::{ReferenceTrajectory, ZProfiles};
use crate::StokesSolver;
use crate::{DistributionField, PhaseGrid, VelocityField};

use super::absorption::AbsorptionModel;
use super::extension::Extension;
use super::transport::{apply_tilde_v, ControlField, TransportSettings};

/// Exponents and thresholds of the iteration set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SEpsilonParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Velocity-drift constant and extension norm entering `c1`.
    pub k3: f64,
    pub c_pi: f64,
}

impl SEpsilonParams {
    /// `delta1 = gamma / (2 (gamma + 3))`, `delta2 = (gamma + 2) / (gamma + 3)` and
    /// `c1 = e^{2T} (1 + K3)^{gamma + 2} C_Pi`.
    pub fn new(gamma: f64, epsilon: f64, t_final: f64, k3: f64, c_pi: f64) -> Result<Self> {
        if !(gamma > 2.0) {
            return Err(Error::InvalidConfig(format!("gamma = {gamma} must exceed 2")));
        }
        Ok(Self {
            gamma,
            epsilon,
            delta1: gamma / (2.0 * (gamma + 3.0)),
            delta2: (gamma + 2.0) / (gamma + 3.0),
            c1: (2.0 * t_final).exp() * (1.0 + k3).powf(gamma + 2.0) * c_pi,
            c2: 100.0,
            c3: 100.0,
            k3,
            c_pi,
        })
    }
}

/// One diagnostic inequality `value <= bound`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Check {
    pub value: f64,
    pub bound: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

/// Points (a)-(e) of the iteration set, measured on `g - fbar`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Membership {
    /// Density in `C^{0, delta1}` against `c3 eps`.
    pub a: Check,
    /// Weighted sup norm against `c1 (||f0||_{C^1} + ||(1+|v|)^{gamma+2} f0||)`.
    pub b: Check,
    /// `C^{0, delta2}` norm against `c2 (...)`.
    pub c: Check,
    /// Largest `|int int v g|` over the slices.
    pub d: Check,
    /// Largest `|int int g - int int f0|` over the slices.
    pub e: Check,
}

impl Membership {
    pub fn flags(&self) -> [bool; 5] {
        [self.a.pass(), self.b.pass(), self.c.pass(), self.d.pass(), self.e.pass()]
    }
}

/// Tolerances and budgets of the fixed-point search.
#[derive(Clone, Copy, Debug)]
pub struct ControlSettings {
    /// Number of slice intervals on `[0, T]`.
    pub intervals: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub momentum_tol: f64,
    pub mass_rel_tol: f64,
    pub transport: TransportSettings,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            intervals: 48,
            tol: 1e-6,
            max_iter: 25,
            momentum_tol: 1e-8,
            mass_rel_tol: 1e-6,
            transport: TransportSettings::default(),
        }
    }
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub delta_sup: f64,
    pub membership: Membership,
    pub max_outside_omega: f64,
}

/// CSV text of the iteration log.
pub fn iteration_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("iter,delta_sup,membership_a,membership_b,membership_c,membership_d,membership_e,max_outside_omega\n");
    for r in records {
        let f = r.membership.flags();
        s.push_str(&format!(
            "{},{:e},{},{},{},{},{},{:e}\n",
            r.iter, r.delta_sup, f[0] as u8, f[1] as u8, f[2] as u8, f[3] as u8, f[4] as u8, r.max_outside_omega
        ));
    }
    s
}

/// State of the iteration: `g = fbar + perturbation` on the slice times.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub times: Vec<f64>,
    /// `g - fbar = Pi h` per slice.
    pub perturbation: Vec<DistributionField>,
    /// The absorbed transport `h = Vtilde[g]` before extension.
    pub transported: Vec<DistributionField>,
    /// `deltaU = Stokes(j_{g - fbar})` per slice; `U^g = Ubar + deltaU`.
    pub delta_u: Vec<VelocityField>,
    pub membership: Membership,
    pub delta_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    /// `sup |g(T)|` over `(T^2 \ omega) x R^2`.
    pub final_outside_omega: f64,
}

/// Slice times `k T / n`.
pub fn slice_times(t_final: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 * t_final / n as f64).collect()
}

/// `sup |f| + sup |grad_{x,v} f|`, derivatives by centred differences.
pub fn c1_norm(f: &DistributionField) -> f64 {
    let g = f.grid;
    let (nx, nv) = (g.nx, g.nv);
    let (dx, dv) = (g.dx(), g.dv());
    let get = |i1: usize, i2: usize, j1: isize, j2: isize| -> f64 {
        if j1 < 0 || j2 < 0 || j1 >= nv as isize || j2 >= nv as isize {
            0.0
        } else {
            f.get(i1 % nx, i2 % nx, j1 as usize, j2 as usize)
        }
    };
    let grad = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let (i1, i2, j1, j2) = g.unindex(idx);
            let (a, b) = (j1 as isize, j2 as isize);
            let d1 = (get(i1 + 1, i2, a, b) - get(i1 + nx - 1, i2, a, b)) / (2.0 * dx);
            let d2 = (get(i1, i2 + 1, a, b) - get(i1, i2 + nx - 1, a, b)) / (2.0 * dx);
            let d3 = (get(i1, i2, a + 1, b) - get(i1, i2, a - 1, b)) / (2.0 * dv);
            let d4 = (get(i1, i2, a, b + 1) - get(i1, i2, a, b - 1)) / (2.0 * dv);
            (d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4).sqrt()
        })
        .reduce(|| 0.0, f64::max);
    f.sup_norm() + grad
}

/// Largest `|f|` over nodes whose position lies outside `omega`.
pub fn sup_outside_omega(f: &DistributionField, region: &crate::ControlRegion) -> f64 {
    let g = f.grid;
    f.values
        .par_chunks(g.velocity_len())
        .enumerate()
        .filter(|(i, _)| !region.in_omega([g.x_node(i / g.nx), g.x_node(i % g.nx)]))
        .map(|(_, block)| block.iter().fold(0.0f64, |m, a| m.max(a.abs())))
        .reduce(|| 0.0, f64::max)
}

/// Everything the operator needs besides the iterate.
pub struct OperatorContext<'a> {
    pub f0: &'a DistributionField,
    pub reference: &'a dyn FlowField<f64>,
    pub model: &'a AbsorptionModel,
    pub params: SEpsilonParams,
    pub settings: ControlSettings,
    pub extension: Extension,
    pub times: Vec<f64>,
    /// `fbar` at the slice times, `None` where it vanishes.
    pub fbar: Vec<Option<DistributionField>>,
    solver: StokesSolver,
    f0_mass: f64,
    data_norm: f64,
}

impl<'a> OperatorContext<'a> {
    /// `fbar` is sampled from `reference_fbar(t)`; pass `|_| None` for a reference with `fbar = 0`.
    pub fn new(
        f0: &'a DistributionField,
        reference: &'a dyn FlowField<f64>,
        reference_fbar: &dyn Fn(f64) -> Option<DistributionField>,
        model: &'a AbsorptionModel,
        params: SEpsilonParams,
        settings: ControlSettings,
    ) -> Result<Self> {
        let grid = f0.grid;
        let times = slice_times(model.t_final, settings.intervals);
        let fbar = times.iter().map(|&t| reference_fbar(t).filter(|f| f.sup_norm() > 0.0)).collect();
        let data_norm = c1_norm(f0) + weighted_sup_norm(f0, params.gamma);
        Ok(Self {
            f0,
            reference,
            model,
            params,
            settings,
            extension: Extension::new(grid, &model.region)?,
            times,
            fbar,
            solver: StokesSolver::new(grid.nx),
            f0_mass: moments(f0).mass,
            data_norm,
        })
    }

    pub fn grid(&self) -> PhaseGrid {
        self.f0.grid
    }

    /// `deltaU` per slice from the perturbation currents.
    pub fn stokes_slices(&self, perturbation: &[DistributionField]) -> Result<Vec<VelocityField>> {
        perturbation
            .iter()
            .map(|p| {
                let m = moments(p);
                let mut j = m.current(p.grid.nx);
                if j.values.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
                    return Ok(VelocityField::zeros(p.grid.nx, p.t));
                }
                // a mean current within the momentum tolerance is quadrature noise
                let mean = j.mean();
                if mean[0].hypot(mean[1]) <= self.settings.momentum_tol {
                    j.values.iter_mut().for_each(|c| {
                        c[0] -= mean[0];
                        c[1] -= mean[1];
                    });
                }
                let mut u = self.solver.solve(&j)?.u;
                u.t = p.t;
                Ok(u)
            })
            .collect()
    }

    /// One application of the operator; returns `(h, Pi h, deltaU used)`.
    pub fn apply_v(&self, perturbation: &[DistributionField]) -> Result<(Vec<DistributionField>, Vec<DistributionField>, Vec<VelocityField>)> {
        let du = self.stokes_slices(perturbation).map_err(|e| e.at("stokes"))?;
        let field = ControlField::new(self.reference, du.clone());
        let h = if self.f0.sup_norm() == 0.0 {
            self.times.iter().map(|&t| DistributionField::zeros(self.grid(), t)).collect()
        } else {
            apply_tilde_v(self.f0, &field, self.model, &self.times, &self.settings.transport).map_err(|e| e.at("transport"))?
        };
        let pi: Vec<DistributionField> = h
            .iter()
            .zip(&self.times)
            .map(|(hk, &t)| self.extension.apply(hk, self.f0_mass, self.model.y_tilde(t)))
            .collect();
        Ok((h, pi, du))
    }

    /// `sup |fbar + p|` over all slices.
    pub fn g_sup(&self, perturbation: &[DistributionField]) -> f64 {
        perturbation
            .iter()
            .zip(&self.fbar)
            .map(|(p, fb)| match fb {
                None => p.sup_norm(),
                Some(fb) => p.values.iter().zip(&fb.values).fold(0.0f64, |m, (a, b)| m.max((a + b).abs())),
            })
            .fold(0.0, f64::max)
    }

    /// Points (a)-(e) for the perturbation series.
    pub fn membership(&self, perturbation: &[DistributionField]) -> Membership {
        let grid = self.grid();
        let p = &self.params;
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 1.0 };
        let recs: Vec<_> = perturbation.iter().map(moments).collect();
        let rho: Vec<f64> = recs.iter().flat_map(|m| m.rho.iter().copied()).collect();
        let axes = [
            Axis { len: perturbation.len(), step: dt, periodic: false },
            Axis { len: grid.nx, step: grid.dx(), periodic: true },
            Axis { len: grid.nx, step: grid.dx(), periodic: true },
        ];
        let rho_sup = rho.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let a = Check { value: rho_sup + holder_seminorm(&rho, &axes, p.delta1), bound: p.c3 * p.epsilon };
        let wsup = perturbation.iter().map(|f| weighted_sup_norm(f, p.gamma)).fold(0.0, f64::max);
        let b = Check { value: wsup, bound: p.c1 * self.data_norm };
        let sup = perturbation.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
        let c = Check { value: sup + holder_seminorm_series(perturbation, dt, p.delta2), bound: p.c2 * self.data_norm };
        let d = Check {
            value: recs.iter().map(|m| m.momentum[0].hypot(m.momentum[1])).fold(0.0, f64::max),
            bound: self.settings.momentum_tol,
        };
        let e = Check {
            value: recs.iter().map(|m| (m.mass - self.f0_mass).abs()).fold(0.0, f64::max),
            bound: self.settings.mass_rel_tol * self.f0_mass.abs().max(f64::MIN_POSITIVE),
        };
        Membership { a, b, c, d, e }
    }
}

/// Runs the Picard iteration from `g_0 = fbar + f0`; never fails on non-convergence.
pub fn picard_iterate(ctx: &OperatorContext) -> Result<IterationState> {
    let mut current: Vec<DistributionField> = ctx
        .times
        .iter()
        .map(|&t| {
            let mut f = ctx.f0.clone();
            f.t = t;
            f
        })
        .collect();
    let mut history = Vec::new();
    let max_iter = ctx.settings.max_iter.max(1);
    for iter in 1..=max_iter {
        let (h, next, du) = ctx.apply_v(&current)?;
        let delta_sup = current
            .iter()
            .zip(&next)
            .map(|(a, b)| a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            .fold(0.0, f64::max);
        let membership = ctx.membership(&next);
        let final_outside_omega = sup_outside_omega(next.last().expect("slices"), &ctx.model.region);
        history.push(IterationRecord { iter, delta_sup, membership, max_outside_omega: final_outside_omega });
        let converged = delta_sup <= ctx.settings.tol * ctx.g_sup(&next).max(1.0);
        if converged || iter == max_iter {
            return Ok(IterationState {
                times: ctx.times.clone(),
                perturbation: next,
                transported: h,
                delta_u: du,
                membership,
                delta_sup,
                iterations: iter,
                converged,
                history,
                final_outside_omega,
            });
        }
        current = next;
    }
    unreachable!("the loop returns on its last iteration")
}

/// [`picard_iterate`] that reports non-convergence as [`Error::NoConvergence`].
pub fn picard_fixed_point(ctx: &OperatorContext) -> Result<IterationState> {
    let s = picard_iterate(ctx)?;
    if s.converged {
        Ok(s)
    } else {
        Err(Error::NoConvergence { iterations: s.iterations, delta: s.delta_sup })
    }
}

/// `fbar` sampler for a reference trajectory on `grid`.
pub fn reference_fbar(reference: &ReferenceTrajectory, grid: PhaseGrid) -> impl Fn(f64) -> Option<DistributionField> + '_ {
    let z = ZProfiles::calibrate(&grid);
    move |t| reference.grad_w_bar(t, grid.nx).map(|_| reference.f_bar(grid, &z, t))
}
