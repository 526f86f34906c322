//! The scenario pipeline: reference trajectory, fixed point, control and diagnostics.

use std::sync::Arc;
use std::time::Instant;

use crate::control_operator::{
    extract_control, flip_velocity, forward_samples, gamma3_sweep, picard_iterate, reference_fbar, solve_two_phase,
    sup_outside_omega, AbsorptionModel, ControlField, ControlReport, ControlSettings, Gamma3Stats, IterationRecord,
    IterationState, OperatorContext, SEpsilonParams, TransportSettings,
};
use crate::error::{Error, Result};
use crate::phase_fields::moments;
use crate::reference_trajectory::{assemble_reference, ReferenceSettings, ReferenceTrajectory};
use crate::torus_geometry::{ControlRegion, TorusPoint};
use crate::{DistributionField, Integrator, MomentRecord, PhaseGrid};

use super::config::{Family, ScenarioConfig};
use super::families::{data_report, scaled_to_mass, scaled_to_weighted_norm, DataReport};

/// Headline figures of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: usize,
    pub delta_sup: f64,
    /// `sup |g(T)|` over `(T^2 \ omega) x R^2`, absolute and relative to `sup |f0|`.
    pub final_outside_norm: f64,
    pub final_outside_rel: f64,
    pub moments_ok: bool,
    pub control_ratio: f64,
    pub control_integral_max: f64,
    pub gamma3_fraction: f64,
    /// `lambda = 1`; other values run outside the certified regime.
    pub certified_regime: bool,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

impl RunSummary {
    /// Whether the run converged with the moment conditions intact.
    pub fn ok(&self) -> bool {
        self.converged && self.moments_ok
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "converged = {}\niterations = {}\ndelta_sup = {:e}\nfinal_outside_norm = {:e}\nfinal_outside_rel = {:e}\n\
             moments_ok = {}\ncontrol_ratio = {:e}\ncontrol_integral_max = {:e}\ngamma3_fraction = {}\n\
             certified_regime = {}\nwall_time_s = {:.3}\n",
            self.converged,
            self.iterations,
            self.delta_sup,
            self.final_outside_norm,
            self.final_outside_rel,
            self.moments_ok,
            self.control_ratio,
            self.control_integral_max,
            self.gamma3_fraction,
            self.certified_regime,
            self.wall_time_s
        );
        if !self.certified_regime {
            s.push_str("regime = outside certified regime (lambda != 1)\n");
        }
        for w in &self.warnings {
            s.push_str(&format!("warning = {w}\n"));
        }
        s
    }
}

/// Figures of the two-phase composition.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhaseSummary {
    pub junction_gap: f64,
    pub terminal_error: f64,
    pub phase_a_converged: bool,
    pub phase_b_converged: bool,
    pub f0_sup: f64,
    pub f1_sup: f64,
    pub f1: DataReport,
}

/// Everything a run produces.
#[derive(Clone, Debug, Default)]
pub struct RunResults {
    pub config: Option<ScenarioConfig>,
    pub summary: RunSummary,
    pub constants_report: String,
    pub data: DataReport,
    pub iterations: Vec<IterationRecord>,
    /// Moments of `g` per slice.
    pub slices: Vec<MomentRecord>,
    /// `sup |g|` outside `omega` per slice.
    pub outside: Vec<f64>,
    pub final_state: Option<DistributionField>,
    pub control: Option<ControlReport>,
    pub gamma3: Option<Gamma3Stats>,
    pub two_phase: Option<TwoPhaseSummary>,
    pub state: Option<IterationState>,
    pub reference: Option<Arc<ReferenceTrajectory>>,
}

/// Control region of a configuration.
pub fn region_of(cfg: &ScenarioConfig) -> Result<ControlRegion<f64>> {
    ControlRegion::new(TorusPoint::new(cfg.x0[0], cfg.x0[1]), cfg.r0)
}

/// Reference settings of a configuration on the horizon `t_final`.
pub fn reference_settings(cfg: &ScenarioConfig, t_final: f64) -> Result<ReferenceSettings> {
    let mut s = ReferenceSettings::new(t_final, region_of(cfg)?);
    s.eps_fit = cfg.eps_fit;
    s.fit.modes = cfg.fit_modes;
    s.fit.grid = cfg.fit_grid;
    s.low_grid = cfg.low_grid;
    s.high.samples = cfg.samples;
    s.high.seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    s.low.samples = cfg.samples;
    s.low.seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(2);
    s.strict = cfg.strict;
    Ok(s)
}

/// Builds the reference trajectory of a configuration.
pub fn build_reference(cfg: &ScenarioConfig, t_final: f64) -> Result<ReferenceTrajectory> {
    assemble_reference(&reference_settings(cfg, t_final)?)
}

fn control_settings(cfg: &ScenarioConfig, friction: f64) -> ControlSettings {
    ControlSettings {
        intervals: cfg.intervals,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        momentum_tol: cfg.mean_tol,
        mass_rel_tol: 1e-6,
        transport: TransportSettings {
            window_steps: cfg.window_steps,
            escape_factor: cfg.escape_factor,
            friction,
            ..TransportSettings::default()
        },
    }
}

fn params(cfg: &ScenarioConfig, t_final: f64) -> Result<SEpsilonParams> {
    let mut p = SEpsilonParams::new(cfg.gamma, cfg.epsilon, t_final, cfg.k3, cfg.c_pi)?;
    p.c2 = cfg.c2;
    p.c3 = cfg.c3;
    Ok(p)
}

/// `fbar + p` per slice.
pub fn full_state(ctx: &OperatorContext, perturbation: &[DistributionField]) -> Vec<DistributionField> {
    perturbation
        .iter()
        .zip(&ctx.fbar)
        .map(|(p, fb)| {
            let mut g = p.clone();
            if let Some(fb) = fb {
                g.values.iter_mut().zip(&fb.values).for_each(|(a, b)| *a += b);
            }
            g
        })
        .collect()
}

/// Runs a scenario; `reference` and `half_reference` (horizon `T/2`, two-phase runs only) are
/// built when not supplied.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    reference: Option<Arc<ReferenceTrajectory>>,
    half_reference: Option<Arc<ReferenceTrajectory>>,
) -> Result<RunResults> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut warnings = Vec::new();
    let grid = PhaseGrid::new(cfg.nx, cfg.nv, cfg.vmax)?;
    let region = region_of(cfg)?;
    let reference = match reference {
        Some(r) => r,
        None => Arc::new(build_reference(cfg, cfg.t_final).map_err(|e| e.at("reference trajectory"))?),
    };
    if reference.fits.failed > 0 {
        warnings.push(format!(
            "{} of {} harmonic fits miss eps_fit = {:e} (worst {:e})",
            reference.fits.failed, reference.fits.directions, cfg.eps_fit, reference.fits.max_grad_target_error
        ));
    }
    if reference.fits.max_laplacian_leak > cfg.lap_tol {
        warnings.push(format!("laplacian leak {:e} above lap_tol {:e}", reference.fits.max_laplacian_leak, cfg.lap_tol));
    }
    if !reference.constants.m_lower_certified {
        warnings.push("high-velocity sweep not certified; m_lower is a fallback".into());
    }
    if reference.constants.mbar > grid.vmax {
        warnings.push(format!(
            "Mbar = {:e} exceeds Vmax = {}; kicked mass leaves the velocity box",
            reference.constants.mbar, grid.vmax
        ));
    }
    if !cfg.certified_regime() {
        warnings.push(format!("lambda = {} is outside the certified regime", cfg.lambda));
    }

    let f0 = scaled_to_weighted_norm(&cfg.f0, grid, cfg.gamma, cfg.epsilon);
    let data = data_report(&f0, cfg.gamma);
    if data.momentum[0].hypot(data.momentum[1]) > cfg.mean_tol {
        return Err(Error::InvalidConfig(format!("f0 has momentum {:?}", data.momentum)).at("data"));
    }
    let model = AbsorptionModel::new(region, cfg.t_final);
    let fb = reference_fbar(&reference, grid);
    let ctx = OperatorContext::new(&f0, reference.as_ref(), &fb, &model, params(cfg, cfg.t_final)?, control_settings(cfg, cfg.lambda))?;
    let state = picard_iterate(&ctx).map_err(|e| e.at("fixed point"))?;
    let g = full_state(&ctx, &state.perturbation);
    let control = extract_control(&g, reference.as_ref(), &state.delta_u, cfg.lambda, &region);
    let slices: Vec<MomentRecord> = g.iter().map(moments).collect();
    let outside: Vec<f64> = g.iter().map(|f| sup_outside_omega(f, &region)).collect();

    let field = ControlField::new(reference.as_ref(), state.delta_u.clone());
    let integ = Integrator::fixed(cfg.t_final, 320 * cfg.intervals / 16).with_window_steps(32).with_friction(cfg.lambda);
    let samples = forward_samples(grid.vmax, cfg.samples, cfg.seed.wrapping_add(3));
    let gamma3 = gamma3_sweep(&field, &integ, &region, cfg.t_final, &samples).map_err(|e| e.at("gamma3 sweep"))?;

    let two_phase = match &cfg.f1 {
        None => None,
        Some(fam) => Some(run_two_phase(cfg, fam, &f0, half_reference).map_err(|e| e.at("two-phase"))?),
    };

    let f0_sup = f0.sup_norm();
    let final_outside_norm = *outside.last().unwrap_or(&0.0);
    let m = state.membership;
    let summary = RunSummary {
        converged: state.converged,
        iterations: state.iterations,
        delta_sup: state.delta_sup,
        final_outside_norm,
        final_outside_rel: if f0_sup > 0.0 { final_outside_norm / f0_sup } else { 0.0 },
        moments_ok: m.d.pass() && m.e.pass(),
        control_ratio: control.ratio,
        control_integral_max: control.integrals.iter().copied().fold(0.0, f64::max),
        gamma3_fraction: gamma3.fraction(),
        certified_regime: cfg.certified_regime(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        warnings,
    };
    Ok(RunResults {
        config: Some(cfg.clone()),
        summary,
        constants_report: reference.constants.report(),
        data,
        iterations: state.history.clone(),
        slices,
        outside,
        final_state: g.last().cloned(),
        control: Some(control),
        gamma3: Some(gamma3),
        two_phase,
        state: Some(state),
        reference: Some(Arc::clone(&reference)),
    })
}

/// Steers `f0` and the reversed target `f1` (scaled to the mass of `f0`) to zero outside `omega`
/// on `[0, T/2]` and measures the composition; `half_reference` has horizon `T/2`.
pub fn run_two_phase(
    cfg: &ScenarioConfig,
    f1_family: &Family,
    f0: &DistributionField,
    half_reference: Option<Arc<ReferenceTrajectory>>,
) -> Result<TwoPhaseSummary> {
    let grid = f0.grid;
    let region = region_of(cfg)?;
    let half = cfg.t_final / 2.0;
    let href = match half_reference {
        Some(r) => r,
        None => Arc::new(build_reference(cfg, half).map_err(|e| e.at("half reference"))?),
    };
    let f1 = scaled_to_mass(f1_family, grid, moments(f0).mass);
    let f1r = flip_velocity(&f1);
    let model = AbsorptionModel::new(region, half);
    let fb = reference_fbar(&href, grid);
    let ctx_a = OperatorContext::new(f0, href.as_ref(), &fb, &model, params(cfg, half)?, control_settings(cfg, cfg.lambda))?;
    let ctx_b = OperatorContext::new(&f1r, href.as_ref(), &fb, &model, params(cfg, half)?, control_settings(cfg, -cfg.lambda))?;
    let r = solve_two_phase(&ctx_a, &ctx_b, &f1)?;
    Ok(TwoPhaseSummary {
        junction_gap: r.junction_gap,
        terminal_error: r.terminal_error,
        phase_a_converged: r.phase_a.converged,
        phase_b_converged: r.phase_b.converged,
        f0_sup: f0.sup_norm(),
        f1_sup: f1.sup_norm(),
        f1: data_report(&f1, cfg.gamma),
    })
}

/// Runs a scenario from scratch.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResults> {
    run_scenario_with(cfg, None, None)
}
