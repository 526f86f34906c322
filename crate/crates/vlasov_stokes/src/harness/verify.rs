//! Self-checks runnable from the command line.

use std::f64::consts::PI;

use crate::characteristics::{constant_field_flow, evaluate_transport_with, flow_map, free_transport_exact, ConstantField, ZeroField};
use crate::error::{Error, Result};
use crate::torus_geometry::{bad_lattice_directions, classify_crossing, first_ball_hit, torus_dist, GammaClass};
use crate::{ControlRegion, Integrator, StokesSolver, TorusPoint, VelocityField};

use super::config::ScenarioConfig;
use super::run::run_scenario;

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 4] = ["geometry", "stokes", "transport", "smoke"];

/// One measured quantity against its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl CheckLine {
    fn new(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol }
    }

    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value <= self.tol
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:e} (tol {:e})", self.name, self.value, self.tol)
    }
}

fn geometry() -> Result<Vec<CheckLine>> {
    let region = ControlRegion::new(TorusPoint::new(0.5, 0.5), 0.2)?;
    let d = torus_dist(TorusPoint::new(0.95, 0.5), TorusPoint::new(0.05, 0.5));
    let dirs = bad_lattice_directions(0.05);
    let axes = dirs.contains(&(1, 0)) && dirs.contains(&(0, 1)) && dirs.contains(&(5, 7)) && !dirs.contains(&(9, 7));
    let head_on = classify_crossing(&region, 0.0, [0.3, 0.5], [3.0, 0.0]).gamma_class;
    let hit = first_ball_hit([0.0, 0.5], [1.0, 0.0], [0.5, 0.5], 0.2).unwrap_or(f64::NAN);
    Ok(vec![
        CheckLine::new("periodic distance", (d - 0.1).abs(), 1e-14),
        CheckLine::new("lattice directions avoiding the r0/4 ball", if axes { 0.0 } else { 1.0 }, 0.0),
        CheckLine::new("head-on crossing in gamma4", if head_on == GammaClass::Minus4 { 0.0 } else { 1.0 }, 0.0),
        CheckLine::new("first ball hit", (hit - 0.3).abs(), 1e-12),
    ])
}

fn stokes() -> Result<Vec<CheckLine>> {
    let n = 32;
    let solver = StokesSolver::new(n);
    let j = VelocityField::from_fn(n, 0.0, |x| [(2.0 * PI * x[1]).sin(), (2.0 * PI * 3.0 * x[0]).cos()]);
    let sol = solver.solve(&j)?;
    let exact = VelocityField::from_fn(n, 0.0, |x| {
        [(2.0 * PI * x[1]).sin() / (4.0 * PI * PI), (2.0 * PI * 3.0 * x[0]).cos() / (36.0 * PI * PI)]
    });
    let err = sol.u.values.iter().zip(&exact.values).map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs())).fold(0.0, f64::max);
    let mut shifted = j.clone();
    shifted.values.iter_mut().for_each(|u| u[0] += 1.0);
    let rejects = matches!(solver.solve(&shifted), Err(Error::NonZeroMean { .. }));
    Ok(vec![
        CheckLine::new("divergence-free modes", err, 1e-13),
        CheckLine::new("divergence norm", solver.divergence_norm(&sol.u), 1e-12),
        CheckLine::new("residual", sol.residual_norm, 1e-10),
        CheckLine::new("nonzero mean rejected", if rejects { 0.0 } else { 1.0 }, 0.0),
    ])
}

fn transport() -> Result<Vec<CheckLine>> {
    let f0 = |x: [f64; 2], v: [f64; 2]| (2.0 * PI * x[0]).cos().powi(2) * (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp();
    let integ = Integrator::fixed(1.0, 200);
    let mut free = 0.0f64;
    for k in 0..8 {
        let x = [0.1 * k as f64, 0.37];
        let v = [1.0 - 0.2 * k as f64, 0.5];
        let num = evaluate_transport_with(f0, &ZeroField, &integ, None, 0.8, TorusPoint::from_vec(x), v)?;
        free = free.max((num - free_transport_exact(f0, 0.8, x, v)).abs());
    }
    let c = [0.3, -0.7];
    let r = flow_map(&ConstantField(c), &integ, 0.2, 0.9, TorusPoint::new(0.4, 0.6), [1.5, 0.5], None)?;
    let (xe, ve) = constant_field_flow(c, 0.2, 0.9, [0.4, 0.6], [1.5, 0.5]);
    let flow_err = torus_dist(r.x, xe).max((r.v[0] - ve[0]).abs()).max((r.v[1] - ve[1]).abs());
    Ok(vec![
        CheckLine::new("free transport vs closed form", free, 1e-9),
        CheckLine::new("constant field flow vs closed form", flow_err, 1e-9),
    ])
}

fn smoke() -> Result<Vec<CheckLine>> {
    let mut cfg = ScenarioConfig::smoke();
    cfg.nx = 16;
    cfg.nv = 16;
    cfg.window_steps = 4;
    let r = run_scenario(&cfg)?;
    let s = &r.summary;
    let m = r.state.as_ref().map(|st| st.membership);
    Ok(vec![
        CheckLine::new("picard delta_sup", if s.converged { s.delta_sup } else { f64::INFINITY }, cfg.tol),
        CheckLine::new("final outside norm / sup f0", s.final_outside_rel, cfg.ctrl_tol),
        CheckLine::new("momentum", m.map_or(f64::NAN, |m| m.d.value), cfg.mean_tol),
        CheckLine::new("mass drift", m.map_or(f64::NAN, |m| m.e.value), m.map_or(f64::NAN, |m| m.e.bound)),
    ])
}

/// Runs a named suite.
pub fn run_suite(name: &str) -> Result<Vec<CheckLine>> {
    match name {
        "geometry" => geometry(),
        "stokes" => stokes(),
        "transport" => transport(),
        "smoke" => smoke(),
        other => Err(Error::InvalidConfig(format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")))),
    }
}
