//! High-velocity pulses with the numerical search for `m_lower`, and the low-velocity kick.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::characteristics::{rk4, trace, FlowField, Integrator};
use crate::error::{Error, Result};
use crate::profiles::eta_max;
use crate::torus_geometry::{first_ball_hit, ControlRegion};
type Vec2 = crate::scalar::Vec2<f64>;

use super::harmonic::HarmonicPotential;
use super::pulses::{amplitude_lower_bound, schedule_time, width_limit, PulseField};

/// Tuning of the high-velocity stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighVelocitySettings {
    /// `A = (1 + a_margin) * amplitude_lower_bound`.
    pub a_margin: f64,
    /// `nu = nu_fraction * tau / (8 (N + 1))`; must stay below 1.
    pub nu_fraction: f64,
    /// Top of the speed ladder.
    pub mbar_max: f64,
    /// Bottom of the speed ladder.
    pub mbar_min: f64,
    /// Geometric bisection steps between the ends of the ladder.
    pub bisection_steps: usize,
    pub samples: usize,
    /// Half-width (radians) of the cones sampled around each bad direction.
    pub cone: f64,
    pub safety: f64,
    /// Largest displacement per RK4 step inside a window, relative to `r0`.
    pub step_fraction: f64,
    pub seed: u64,
}

impl Default for HighVelocitySettings {
    fn default() -> Self {
        Self {
            a_margin: 0.1,
            nu_fraction: 0.5,
            mbar_max: 4096.0,
            mbar_min: 1.0,
            bisection_steps: 8,
            samples: 1000,
            cone: 0.02,
            safety: 1.2,
            step_fraction: 0.05,
            seed: 0x5eed_0001,
        }
    }
}

/// `U1(t, x) = sum_i A/nu eta((t - t_{i+1/4})/nu) grad^perp theta^i(x)` on `[0, tau]`.
#[derive(Clone, Debug)]
pub struct HighVelocityField {
    pub tau: f64,
    pub big_a: f64,
    pub nu: f64,
    pub directions: Vec<Vec2>,
    /// Window starts `t_{i+1/4}`, `i = 1..N`.
    pub schedule: Vec<f64>,
    pub field: PulseField,
}

impl HighVelocityField {
    /// Pulses of amplitude `A/nu` and width `nu` at `t_{i+1/4}`, one per direction.
    pub fn new(
        tau: f64,
        directions: Vec<Vec2>,
        potentials: Vec<Arc<HarmonicPotential>>,
        a_margin: f64,
        nu_fraction: f64,
    ) -> Result<Self> {
        let n = directions.len();
        if potentials.len() != n {
            return Err(Error::InvalidConfig(format!("{} potentials for {n} directions", potentials.len())));
        }
        let limit = width_limit(tau, n);
        let nu = nu_fraction * limit;
        if !(nu > 0.0) || nu >= limit {
            return Err(Error::ScheduleInfeasible { nu, limit });
        }
        let big_a = amplitude_lower_bound(tau, n) * (1.0 + a_margin.max(0.0));
        let mut field = PulseField::new(potentials);
        let mut schedule = Vec::with_capacity(n);
        for i in 1..=n {
            let start = schedule_time(tau, n, i as f64 + 0.25);
            field.push(start, nu, big_a / nu, i - 1);
            schedule.push(start);
        }
        Ok(Self { tau, big_a, nu, directions, schedule, field })
    }

    /// Discrete `sup|U| + sup|d_t U| + sup|grad U|` with `eta'` sampled and Hessians tabulated.
    pub fn lipschitz_estimate(&self) -> f64 {
        let g = self.field.potentials().iter().map(|p| p.grad_sup).fold(0.0, f64::max);
        let h = self.field.potentials().iter().map(|p| p.hess_sup).fold(0.0, f64::max);
        let amp = self.big_a / self.nu;
        let eta_p = eta_prime_sampled();
        amp * eta_max() * g + amp / self.nu * eta_p * g + amp * eta_max() * h
    }
}

fn eta_prime_sampled() -> f64 {
    let n = 4096;
    let h = 1.0 / n as f64;
    (0..n).map(|k| ((crate::profiles::eta((k + 1) as f64 * h) - crate::profiles::eta(k as f64 * h)) / h).abs()).fold(0.0, f64::max)
}

/// Stratified `(x, v)` samples at speeds `speed * {1, 1.5, 2, 4}`: each bad direction with
/// offsets `{0, +-cone/2, +-cone}`, then uniformly random directions up to `count`.
pub fn stratified_samples(directions: &[Vec2], speed: f64, count: usize, cone: f64, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mults = [1.0, 1.5, 2.0, 4.0];
    let offsets = [0.0, 0.5 * cone, -0.5 * cone, cone, -cone];
    let mut out = Vec::new();
    let mut k = 0usize;
    let mut push = |ang: f64, rng: &mut ChaCha8Rng, out: &mut Vec<(Vec2, Vec2)>| {
        let s = speed * mults[k % mults.len()];
        k += 1;
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        out.push((x, [s * ang.cos(), s * ang.sin()]));
    };
    for e in directions {
        let base = e[1].atan2(e[0]);
        for o in offsets {
            push(base + o, &mut rng, &mut out);
        }
    }
    let generic = count.saturating_sub(out.len()).max(count / 10);
    for _ in 0..generic {
        let ang = rng.gen::<f64>() * 2.0 * PI;
        push(ang, &mut rng, &mut out);
    }
    out
}

/// Whether the characteristic from `(x, v)` at time 0 meets `B(x0, r0/4)` at some time in
/// `(tau/4, 3 tau/4)` with speed at least `floor`.
///
/// Between windows the field vanishes and the flow is the exact free one; inside windows RK4
/// steps are sized so that each moves at most `max_step`, and every step is tested as a segment.
pub fn sweep_hits(hv: &HighVelocityField, region: &ControlRegion<f64>, x: Vec2, v: Vec2, floor: f64, max_step: f64) -> bool {
    let c = region.x0.as_vec();
    let rb = region.r0 / 4.0;
    let (t_lo, t_hi) = (hv.tau / 4.0, 0.75 * hv.tau);
    let field = &hv.field;
    let g_sup = field.potentials().iter().map(|p| p.grad_sup).fold(0.0, f64::max);
    let mut t = 0.0;
    let mut x = x;
    let mut v = v;

    let free = |x: Vec2, v: Vec2, dt: f64| {
        let s = 1.0 - (-dt).exp();
        ([x[0] + s * v[0], x[1] + s * v[1]], [v[0] * (1.0 - s), v[1] * (1.0 - s)])
    };
    // exact flight over [t0, t1]; returns Some(true) on an admissible hit
    let gap = |t0: f64, t1: f64, x: &mut Vec2, v: &mut Vec2| -> bool {
        let a = t0.max(t_lo);
        let b = t1.min(t_hi);
        let mut hit = false;
        if a < b {
            let (xa, va) = free(*x, *v, a - t0);
            let s_tot = 1.0 - (-(b - a)).exp();
            if let Some(s) = first_ball_hit(xa, [s_tot * va[0], s_tot * va[1]], c, rb) {
                let speed = va[0].hypot(va[1]) * (1.0 - s * s_tot);
                hit = speed >= floor;
            }
        }
        let (x1, v1) = free(*x, *v, t1 - t0);
        *x = x1;
        *v = v1;
        hit
    };

    for (w, win) in field.windows().iter().enumerate() {
        if win.start >= t_hi {
            break;
        }
        if gap(t, win.start, &mut x, &mut v) {
            return true;
        }
        let amp = field.pulses()[w].amp;
        let speed = v[0].hypot(v[1]) + amp * win.width * eta_max() * g_sup;
        let n = ((speed * win.width / max_step).ceil() as usize).max(32);
        let ds = win.width / n as f64;
        let f = |sig: f64, xx: Vec2| field.eval_window(w, sig, xx);
        for k in 0..n {
            let sig = k as f64 * ds;
            let (x1, v1) = rk4(&f, 1.0, sig, ds, x, v);
            let tabs = win.start + sig;
            if tabs > t_lo && tabs < t_hi {
                if let Some(s) = first_ball_hit(x, [x1[0] - x[0], x1[1] - x[1]], c, rb) {
                    let s0 = v[0].hypot(v[1]);
                    let s1 = v1[0].hypot(v1[1]);
                    if s0 + s * (s1 - s0) >= floor {
                        return true;
                    }
                }
            }
            x = [x1[0] - x1[0].floor(), x1[1] - x1[1].floor()];
            v = v1;
        }
        t = win.start + win.width;
    }
    gap(t, t_hi, &mut x, &mut v)
}

/// Pass counts of one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    pub passed: usize,
    pub total: usize,
}

impl SweepStats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

/// Runs [`sweep_hits`] over `samples` in parallel with the floor `level / (2 e^tau)`.
pub fn high_velocity_sweep(
    hv: &HighVelocityField,
    region: &ControlRegion<f64>,
    samples: &[(Vec2, Vec2)],
    level: f64,
    step_fraction: f64,
) -> SweepStats {
    let floor = level / (2.0 * hv.tau.exp());
    let max_step = step_fraction * region.r0;
    let passed = samples.par_iter().filter(|(x, v)| sweep_hits(hv, region, *x, *v, floor, max_step)).count();
    SweepStats { passed, total: samples.len() }
}

/// Outcome of the `m_lower` ladder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutcome {
    /// Certified threshold (safety factor included), or `None` if the top rung failed.
    pub m_lower: Option<f64>,
    /// Rungs visited as `(speed, pass fraction)`.
    pub ladder: Vec<(f64, f64)>,
    pub samples: usize,
}

impl SweepOutcome {
    /// Pass fraction at the top of the ladder.
    pub fn top_fraction(&self) -> f64 {
        self.ladder.first().map_or(0.0, |r| r.1)
    }
}

/// Geometric bisection for the smallest speed whose stratified sample passes entirely.
pub fn search_m_lower(hv: &HighVelocityField, region: &ControlRegion<f64>, settings: &HighVelocitySettings) -> SweepOutcome {
    let run = |m: f64| {
        let s = stratified_samples(&hv.directions, m, settings.samples, settings.cone, settings.seed);
        (high_velocity_sweep(hv, region, &s, m, settings.step_fraction), s.len())
    };
    let (top, count) = run(settings.mbar_max);
    let mut out = SweepOutcome { m_lower: None, ladder: vec![(settings.mbar_max, top.fraction())], samples: count };
    if top.passed < top.total {
        return out;
    }
    let (mut lo, mut hi) = (settings.mbar_min, settings.mbar_max);
    for _ in 0..settings.bisection_steps {
        let mid = (lo * hi).sqrt();
        let (st, _) = run(mid);
        out.ladder.push((mid, st.fraction()));
        if st.passed == st.total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    out.m_lower = Some(settings.safety * hi);
    out
}

/// Tuning of the low-velocity stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowVelocitySettings {
    pub b_max: f64,
    pub samples: usize,
    pub window_steps: usize,
    /// `Mbar = margin * (largest sampled speed)`.
    pub margin: f64,
    pub seed: u64,
}

impl Default for LowVelocitySettings {
    fn default() -> Self {
        Self { b_max: 1e24, samples: 1000, window_steps: 64, margin: 1.1, seed: 0x5eed_0002 }
    }
}

/// `U2(t, x) = a eta(b t) grad^perp theta(x)` on `[0, 1/b)`.
#[derive(Clone, Debug)]
pub struct LowVelocityField {
    pub tau: f64,
    pub speed_bound: f64,
    pub m_grad: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mbar: f64,
    /// Fraction of build samples accelerated at the returned `b`.
    pub accepted_fraction: f64,
    /// Same fraction restricted to samples with `|grad theta(x)| >= m`.
    pub accepted_fraction_regular: f64,
    pub field: PulseField,
}

/// Uniform `x` and `v` uniform in the disc `|v| <= speed`, plus `v = 0` and boundary speeds.
pub fn kick_samples(speed: f64, count: usize, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let ang = rng.gen::<f64>() * 2.0 * PI;
            let r = match k % 10 {
                0 => 0.0,
                1 => speed,
                _ => speed * rng.gen::<f64>().sqrt(),
            };
            (x, [r * ang.cos(), r * ang.sin()])
        })
        .collect()
}

/// Result of tracing one sample through the low-velocity window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kick {
    /// Whether `|V| > M + 1` at some step.
    pub escaped: bool,
    /// Largest `|V|` seen.
    pub max_speed: f64,
}

/// Traces `(x, v)` through the window of `field` (starting at its first window).
pub fn kick(field: &PulseField, speed_bound: f64, window_steps: usize, x: Vec2, v: Vec2) -> Kick {
    let Some((s, e)) = field.support() else {
        return Kick { escaped: v[0].hypot(v[1]) > speed_bound + 1.0, max_speed: v[0].hypot(v[1]) };
    };
    let integ = Integrator::fixed(e - s, 1).with_window_steps(window_steps);
    let mut out = Kick { escaped: false, max_speed: v[0].hypot(v[1]) };
    let mut obs = |st: &crate::characteristics::StepInfo<f64>| {
        let sp = st.v1[0].hypot(st.v1[1]);
        out.max_speed = out.max_speed.max(sp);
        out.escaped |= sp > speed_bound + 1.0;
        true
    };
    let _ = trace(field, &integ, s, e, x, v, None, &mut obs);
    out
}

/// Pass counts and the peak speed of a kick sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KickStats {
    pub passed: usize,
    pub total: usize,
    pub max_speed: f64,
}

/// Kicks every sample; a sample passes when it exceeds `M + 1` and stays within `mbar`.
pub fn low_velocity_kick(low: &LowVelocityField, samples: &[(Vec2, Vec2)], window_steps: usize) -> KickStats {
    let res: Vec<Kick> = samples.par_iter().map(|(x, v)| kick(&low.field, low.speed_bound, window_steps, *x, *v)).collect();
    KickStats {
        passed: res.iter().filter(|k| k.escaped && k.max_speed < low.mbar).count(),
        total: res.len(),
        max_speed: res.iter().map(|k| k.max_speed).fold(0.0, f64::max),
    }
}

/// `c = 2(M+1)/m`, then `b` doubled from `b0` until every sample whose position satisfies
/// `|grad theta(x)| >= m` is accelerated past `M + 1`.
///
/// `b0` is the smallest power of two above `max(2/tau, (c sup|grad theta| + M) / (r0/10))`,
/// which keeps the displacement during the window below `r0/10`.
pub fn build_low_velocity_field(
    tau: f64,
    big_m: f64,
    region: &ControlRegion<f64>,
    potential: Arc<HarmonicPotential>,
    m: f64,
    settings: &LowVelocitySettings,
) -> Result<LowVelocityField> {
    let (field, certified) = search_low_velocity_field(tau, big_m, region, potential, m, settings)?;
    if !certified {
        return Err(Error::BudgetExceeded { b_max: settings.b_max, fraction: field.accepted_fraction_regular });
    }
    Ok(field)
}

/// Same search as [`build_low_velocity_field`], but an exhausted budget returns the field at the
/// last admissible `b` together with `false`.
pub fn search_low_velocity_field(
    tau: f64,
    big_m: f64,
    region: &ControlRegion<f64>,
    potential: Arc<HarmonicPotential>,
    m: f64,
    settings: &LowVelocitySettings,
) -> Result<(LowVelocityField, bool)> {
    if !(m > 0.0) {
        return Err(Error::DegenerateFit { min_grad: m });
    }
    let c = 2.0 * (big_m + 1.0) / m;
    let g = potential.grad_sup;
    let b0 = (2.0 / tau).max((c * g + big_m) / (region.r0 / 10.0));
    let mut b = 2f64.powf(b0.log2().ceil());
    if b > settings.b_max {
        return Err(Error::BudgetExceeded { b_max: settings.b_max, fraction: 0.0 });
    }
    let samples = kick_samples(big_m, settings.samples, settings.seed);
    let regular: Vec<bool> = samples
        .iter()
        .map(|(x, _)| {
            let u = potential.eval_grad_perp(*x);
            u[0].hypot(u[1]) >= m
        })
        .collect();
    let n_reg = regular.iter().filter(|r| **r).count();
    loop {
        let mut field = PulseField::new(vec![potential.clone()]);
        field.push(0.0, 1.0 / b, c * b, 0);
        let kicks: Vec<Kick> =
            samples.par_iter().map(|(x, v)| kick(&field, big_m, settings.window_steps, *x, *v)).collect();
        let ok = kicks.iter().filter(|k| k.escaped).count();
        let ok_reg = kicks.iter().zip(&regular).filter(|(k, r)| **r && k.escaped).count();
        let certified = ok_reg == n_reg;
        if certified || 2.0 * b > settings.b_max {
            let peak = kicks.iter().map(|k| k.max_speed).fold(0.0, f64::max);
            let low = LowVelocityField {
                tau,
                speed_bound: big_m,
                m_grad: m,
                a: c * b,
                b,
                c,
                mbar: settings.margin * peak,
                accepted_fraction: ok as f64 / kicks.len().max(1) as f64,
                accepted_fraction_regular: ok_reg as f64 / n_reg.max(1) as f64,
                field,
            };
            return Ok((low, certified));
        }
        b *= 2.0;
    }
}
