//! The reference solution `(fbar, Ubar, pbar)` of the return method: harmonic potentials,
//! high- and low-velocity pulse fields glued on the thirds of `[0, T]`, and the distribution
//! `fbar = Z1(v) d1 Wbar + Z2(v) d2 Wbar` built from the vorticity `Wbar = curl Ubar`.

pub mod harmonic;
pub mod pulses;
pub mod sweep;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::characteristics::FlowField;
use crate::error::{Error, Result};
use crate::phase_fields::moments;
use crate::{DistributionField, PhaseGrid, VelocityField};
use crate::stokes_spectral::Spectral2d;
use crate::torus_geometry::{bad_directions, ControlRegion};
type Vec2 = crate::scalar::Vec2<f64>;

pub use harmonic::{
    band_distance, fit_harmonic_direction, fit_low_velocity_potential, lattice_length, min_grad_outside, BumpSource,
    FitReport, FitSettings, HarmonicPotential, HighVelocityBasis,
};
pub use pulses::{amplitude_lower_bound, derive_constants, schedule_time, width_limit, Constants, Pulse, PulseField};
pub use sweep::{
    build_low_velocity_field, high_velocity_sweep, kick_samples, low_velocity_kick, search_m_lower, stratified_samples,
    search_low_velocity_field, sweep_hits, HighVelocityField, HighVelocitySettings, KickStats, LowVelocityField, LowVelocitySettings,
    SweepOutcome, SweepStats,
};

/// Everything needed to assemble the reference trajectory.
#[derive(Clone, Debug)]
pub struct ReferenceSettings {
    pub t_final: f64,
    pub region: ControlRegion<f64>,
    pub eps_fit: f64,
    pub fit: FitSettings,
    /// Grid of the low-velocity dipole scan.
    pub low_grid: usize,
    pub high: HighVelocitySettings,
    pub low: LowVelocitySettings,
    /// Abort on a failed fit or an uncertified sweep instead of continuing with flagged reports.
    pub strict: bool,
}

impl ReferenceSettings {
    pub fn new(t_final: f64, region: ControlRegion<f64>) -> Self {
        Self {
            t_final,
            region,
            eps_fit: 1e-2,
            fit: FitSettings::default(),
            low_grid: 512,
            high: HighVelocitySettings::default(),
            low: LowVelocitySettings::default(),
            strict: false,
        }
    }
}

/// Worst fit figures over all bad directions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitSummary {
    pub directions: usize,
    pub max_grad_target_error: f64,
    pub max_grad_sup_error: f64,
    pub max_laplacian_leak: f64,
    /// Directions whose fit misses `eps_fit`.
    pub failed: usize,
    pub low_m: f64,
    pub low_leak: f64,
    /// Whether the `b` search accelerated every regular sample within the budget.
    pub low_certified: bool,
    /// `A * eps / nu` with `eps` the worst `grad_target_error`; the construction asks for `< 1`.
    pub a_eps_over_nu: f64,
}

/// Calibrated velocity profiles `Z1 = -k v2 e^{-|v|^2/2}`, `Z2 = k v1 e^{-|v|^2/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZProfiles {
    pub k: f64,
    /// Quadrature moments `q[a][b] = sum v_a Z_b dv`.
    pub q: [[f64; 2]; 2],
}

impl ZProfiles {
    /// Fixes `k` so that `sum v2 Z1 dv = -1` on the velocity grid.
    pub fn calibrate(grid: &PhaseGrid) -> Self {
        let dv2 = grid.dv() * grid.dv();
        let mut s = 0.0;
        for j1 in 0..grid.nv {
            for j2 in 0..grid.nv {
                let v = [grid.v_node(j1), grid.v_node(j2)];
                s += v[1] * v[1] * gauss(v);
            }
        }
        let mut z = Self { k: 1.0 / (s * dv2), q: [[0.0; 2]; 2] };
        for j1 in 0..grid.nv {
            for j2 in 0..grid.nv {
                let v = [grid.v_node(j1), grid.v_node(j2)];
                let (z1, z2) = z.eval(v);
                for a in 0..2 {
                    z.q[a][0] += v[a] * z1 * dv2;
                    z.q[a][1] += v[a] * z2 * dv2;
                }
            }
        }
        z
    }

    #[inline]
    pub fn eval(&self, v: Vec2) -> (f64, f64) {
        let g = gauss(v);
        (-self.k * v[1] * g, self.k * v[0] * g)
    }
}

#[inline]
fn gauss(v: Vec2) -> f64 {
    (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp()
}

/// The assembled reference trajectory.
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory {
    pub t_final: f64,
    pub region: ControlRegion<f64>,
    /// `Ubar` on `[0, T]`: `U1`, then `U2(t - T/3)`, then `U1(t - 2T/3)`.
    pub field: PulseField,
    pub high: HighVelocityField,
    pub low: LowVelocityField,
    pub constants: Constants,
    pub sweep: SweepOutcome,
    pub fits: FitSummary,
}

impl FlowField<f64> for ReferenceTrajectory {
    fn eval(&self, _t: f64, _x: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn windows(&self) -> &[crate::characteristics::Window<f64>] {
        self.field.windows()
    }

    fn eval_window(&self, w: usize, sigma: f64, x: Vec2) -> Vec2 {
        self.field.eval_window(w, sigma, x)
    }
}

impl ReferenceTrajectory {
    pub fn u_bar(&self, t: f64, x: Vec2) -> Vec2 {
        self.field.value(t, x)
    }

    /// `Ubar(t)` sampled on the `nx x nx` lattice.
    pub fn u_bar_slice(&self, t: f64, nx: usize) -> VelocityField {
        VelocityField::from_fn(nx, t, |x| self.u_bar(t, x))
    }

    /// `grad Wbar(t)` on the `nx x nx` lattice, `None` when no pulse is active.
    pub fn grad_w_bar(&self, t: f64, nx: usize) -> Option<[Vec<f64>; 2]> {
        let (w, sigma) = self.field.active(t)?;
        let s = self.field.profile(w, sigma);
        if s == 0.0 {
            return None;
        }
        let [g1, g2] = self.field.potential(w).grad_laplacian_sampled(nx);
        Some([g1.into_iter().map(|a| s * a).collect(), g2.into_iter().map(|a| s * a).collect()])
    }

    /// `fbar(t)` on `grid`; identically zero when no pulse is active.
    pub fn f_bar(&self, grid: PhaseGrid, z: &ZProfiles, t: f64) -> DistributionField {
        let mut f = DistributionField::zeros(grid, t);
        let Some([g1, g2]) = self.grad_w_bar(t, grid.nx) else {
            return f;
        };
        let zs: Vec<(f64, f64)> = (0..grid.velocity_len())
            .map(|j| z.eval([grid.v_node(j / grid.nv), grid.v_node(j % grid.nv)]))
            .collect();
        f.values.par_chunks_mut(grid.velocity_len()).enumerate().for_each(|(i, block)| {
            for (val, (z1, z2)) in block.iter_mut().zip(&zs) {
                *val = z1 * g1[i] + z2 * g2[i];
            }
        });
        f
    }

    /// Times at which invariants are checked: slice times `k T / 48` and the middle of every
    /// window of the first high-velocity pulse, the low-velocity pulse and the last pulse.
    pub fn probe_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..=48).map(|k| k as f64 * self.t_final / 48.0).collect();
        let w = self.field.windows();
        if let Some(first) = w.first() {
            out.push(first.start + 0.5 * first.width);
        }
        if let Some((k, _)) = self.field.active(self.t_final / 3.0) {
            out.push(w[k].start + 0.5 * w[k].width);
        }
        if let Some(last) = w.last() {
            out.push(last.start + 0.5 * last.width);
        }
        out
    }

    /// Measures the invariants on `grid` at [`Self::probe_times`].
    pub fn check_invariants(&self, grid: PhaseGrid) -> ReferenceInvariants {
        let z = ZProfiles::calibrate(&grid);
        let mut inv = ReferenceInvariants {
            f_initial_sup: self.f_bar(grid, &z, 0.0).sup_norm(),
            f_final_sup: self.f_bar(grid, &z, self.t_final).sup_norm(),
            z_q: z.q,
            ..ReferenceInvariants::default()
        };
        for t in self.probe_times() {
            let f = self.f_bar(grid, &z, t);
            let sup = f.sup_norm();
            inv.f_sup = inv.f_sup.max(sup);
            if sup > 0.0 {
                let m = moments(&f);
                inv.rho_rel = inv.rho_rel.max(m.max_abs_rho() / sup);
                let mut outside = 0.0f64;
                for (idx, v) in f.values.iter().enumerate() {
                    let (x, _) = grid.node(idx);
                    if !self.region.in_omega(x) {
                        outside = outside.max(v.abs());
                    }
                }
                inv.outside_omega_rel = inv.outside_omega_rel.max(outside / sup);
            }
            if let Some((w, sigma)) = self.field.active(t) {
                let s = self.field.profile(w, sigma);
                let pot = self.field.potential(w);
                let mean = pot.grad_perp.mean();
                let scale = pot.grad_sup.max(f64::MIN_POSITIVE);
                inv.u_mean_rel = inv.u_mean_rel.max(mean[0].hypot(mean[1]) / scale);
                inv.u_mean_abs = inv.u_mean_abs.max(s.abs() * mean[0].hypot(mean[1]));
                inv.stokes_residual_rel = inv.stokes_residual_rel.max(stokes_residual(pot, &z));
            }
        }
        inv
    }
}

/// Relative residual of `-Lap W = curl j` for `W = Lap theta` and `j = Q grad W`, with `Q` the
/// quadrature moment matrix of the velocity profiles, at the tabulation resolution.
pub fn stokes_residual(pot: &HarmonicPotential, z: &ZProfiles) -> f64 {
    let n = pot.grid();
    let sp = Spectral2d::<f64>::new(n);
    let w = pot.laplacian_on(n);
    let [g1, g2] = pot.grad_laplacian_on(n);
    let j1: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| z.q[0][0] * a + z.q[0][1] * b).collect();
    let j2: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| z.q[1][0] * a + z.q[1][1] * b).collect();
    let curl: Vec<f64> = sp.derivative(&j2, 0).iter().zip(sp.derivative(&j1, 1)).map(|(a, b)| a - b).collect();
    let lap = sp.laplacian(&w);
    let res = lap.iter().zip(&curl).map(|(l, c)| (-l - c).abs()).fold(0.0, f64::max);
    let scale = lap.iter().map(|l| l.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        res / scale
    }
}

/// Measured invariants of the reference trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferenceInvariants {
    pub f_initial_sup: f64,
    pub f_final_sup: f64,
    pub f_sup: f64,
    /// `max |rho_fbar| / sup |fbar|` over probe times.
    pub rho_rel: f64,
    /// `|int Ubar dx|` relative to `sup |grad theta|`, and the absolute value.
    pub u_mean_rel: f64,
    pub u_mean_abs: f64,
    /// `sup_{outside omega} |fbar| / sup |fbar|`.
    pub outside_omega_rel: f64,
    pub stokes_residual_rel: f64,
    pub z_q: [[f64; 2]; 2],
}

/// Builds the reference trajectory: fits, pulses, the `m_lower` ladder, constants, the low
/// kick and the glue on the thirds of `[0, T]`.
pub fn assemble_reference(settings: &ReferenceSettings) -> Result<ReferenceTrajectory> {
    let region = settings.region;
    let t_final = settings.t_final;
    let tau = t_final / 3.0;
    let directions = bad_directions(&region);

    let basis = HighVelocityBasis::new(&region, settings.fit).map_err(|e| e.at("harmonic basis"))?;
    let mut potentials = Vec::with_capacity(directions.len());
    let mut fits = FitSummary { directions: directions.len(), ..FitSummary::default() };
    for e in &directions {
        let pot = basis.fit(*e).map_err(|e| e.at("harmonic fit"))?;
        let r = pot.fit_report;
        fits.max_grad_target_error = fits.max_grad_target_error.max(r.grad_target_error);
        fits.max_grad_sup_error = fits.max_grad_sup_error.max(r.grad_sup_error);
        fits.max_laplacian_leak = fits.max_laplacian_leak.max(r.laplacian_leak);
        if r.grad_target_error > settings.eps_fit {
            fits.failed += 1;
        }
        potentials.push(Arc::new(pot));
    }
    if settings.strict && fits.failed > 0 {
        return Err(Error::FitFailed { achieved: fits.max_grad_target_error, target: settings.eps_fit }.at("harmonic fit"));
    }

    let high = HighVelocityField::new(tau, directions, potentials, settings.high.a_margin, settings.high.nu_fraction)
        .map_err(|e| e.at("high-velocity field"))?;
    fits.a_eps_over_nu = high.big_a * fits.max_grad_target_error / high.nu;
    let sweep = search_m_lower(&high, &region, &settings.high);
    if settings.strict && sweep.m_lower.is_none() {
        return Err(Error::InvalidConfig(format!(
            "high-velocity sweep failed at the top speed {} (pass fraction {})",
            settings.high.mbar_max,
            sweep.top_fraction()
        ))
        .at("high-velocity sweep"));
    }
    let m_lower = sweep.m_lower.unwrap_or(settings.high.safety * settings.high.mbar_max);
    let mut constants = derive_constants(t_final, region.r0, high.lipschitz_estimate(), m_lower);
    constants.m_lower_certified = sweep.m_lower.is_some();
    constants.big_a = high.big_a;
    constants.nu = high.nu;
    constants.n_directions = high.directions.len();

    let (low_pot, m) = fit_low_velocity_potential(&region, settings.low_grid).map_err(|e| e.at("low-velocity potential"))?;
    fits.low_m = m;
    fits.low_leak = low_pot.fit_report.laplacian_leak;
    let (low, low_certified) =
        search_low_velocity_field(tau, constants.big_m1, &region, Arc::new(low_pot), m, &settings.low)
            .map_err(|e| e.at("low-velocity field"))?;
    if settings.strict && !low_certified {
        return Err(Error::BudgetExceeded { b_max: settings.low.b_max, fraction: low.accepted_fraction_regular }
            .at("low-velocity field"));
    }
    fits.low_certified = low_certified;
    constants.m_grad = m;
    constants.a = low.a;
    constants.b = low.b;
    constants.c = low.c;
    constants.mbar = low.mbar;

    let field = glue(&high.field, &low.field, t_final)?;
    Ok(ReferenceTrajectory { t_final, region, field, high, low, constants, sweep, fits })
}

/// `U1` on `(0, T/3)`, `U2` shifted to `(T/3, 2T/3)`, `U1` shifted to `(2T/3, T)`.
pub fn glue(u1: &PulseField, u2: &PulseField, t_final: f64) -> Result<PulseField> {
    let third = t_final / 3.0;
    for (part, lo) in [(u1, 0.0), (u2, 0.0)] {
        if let Some((s, e)) = part.support() {
            if s < lo || e > third {
                let t = if s < lo { s } else { e };
                return Err(Error::GlueDiscontinuity { t, value: part.sup_bound() });
            }
        }
    }
    let mid = u2.shifted(third);
    let last = u1.shifted(2.0 * third);
    let field = PulseField::concat(&[u1, &mid, &last]);
    for t in [third, 2.0 * third] {
        let value = [0.1, 0.35, 0.6, 0.85]
            .iter()
            .flat_map(|&a| [0.2, 0.7].map(move |b| [a, b]))
            .map(|x| {
                let u = field.value(t, x);
                u[0].hypot(u[1])
            })
            .fold(0.0, f64::max);
        if value > 0.0 {
            return Err(Error::GlueDiscontinuity { t, value });
        }
    }
    Ok(field)
}

/// `k = 1/(2 pi)`, the continuum value of the profile normalisation.
pub const Z_NORMALIZATION: f64 = 1.0 / (2.0 * PI);
