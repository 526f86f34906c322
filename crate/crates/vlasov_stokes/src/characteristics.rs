//! Characteristics of `X' = V`, `V' = -V + U(t, X)`: RK4 tracing, closed-form oracles,
//! sphere crossings along the way and the transport formula with absorption.

use crate::error::{Error, Result};
use crate::phase_fields::{DistributionField, VelocityField};
use crate::scalar::{lit, norm, to_f64, Real, Vec2};
use crate::torus_geometry::{classify_crossing, torus_delta, ControlRegion, SphereCrossing, TorusPoint};

/// A short time interval `[start, start + width)` carrying an extra, possibly huge, field term.
///
/// Inside a window the integrator runs on the local clock `sigma = t - start`, so windows far
/// narrower than the floating-point spacing of `start` are still resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window<T> {
    pub start: T,
    pub width: T,
}

/// A time-dependent velocity field on the torus.
pub trait FlowField<T: Real>: Sync {
    /// Background part, evaluated at absolute time `t`.
    fn eval(&self, t: T, x: Vec2<T>) -> Vec2<T>;

    /// Disjoint windows sorted by start time.
    fn windows(&self) -> &[Window<T>] {
        &[]
    }

    /// Additional term active inside window `w`, at local time `sigma`.
    fn eval_window(&self, _w: usize, _sigma: T, _x: Vec2<T>) -> Vec2<T> {
        [T::zero(); 2]
    }
}

/// `U = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl<T: Real> FlowField<T> for ZeroField {
    fn eval(&self, _t: T, _x: Vec2<T>) -> Vec2<T> {
        [T::zero(); 2]
    }
}

/// Spatially and temporally constant field.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField<T>(pub Vec2<T>);

impl<T: Real> FlowField<T> for ConstantField<T> {
    fn eval(&self, _t: T, _x: Vec2<T>) -> Vec2<T> {
        self.0
    }
}

/// Field given by a closure of `(t, x)`.
pub struct FnField<F>(pub F);

impl<T: Real, F: Fn(T, Vec2<T>) -> Vec2<T> + Sync> FlowField<T> for FnField<F> {
    fn eval(&self, t: T, x: Vec2<T>) -> Vec2<T> {
        (self.0)(t, x)
    }
}

/// Stored time slices, linear in time and bicubic in space; constant beyond the end slices.
#[derive(Clone, Debug)]
pub struct SlicedField<T> {
    pub slices: Vec<VelocityField<T>>,
}

impl<T: Real> SlicedField<T> {
    pub fn new(slices: Vec<VelocityField<T>>) -> Self {
        Self { slices }
    }

    /// Largest `||U(t_{k+1}) - U(t_k)||_inf` relative to `max_k ||U(t_k)||_inf`.
    pub fn max_relative_jump(&self) -> T {
        let top = self.slices.iter().fold(T::zero(), |m, s| m.max(s.sup_norm()));
        if top == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for w in self.slices.windows(2) {
            let d = w[0].values.iter().zip(&w[1].values).fold(T::zero(), |m, (a, b)| {
                m.max(norm([b[0] - a[0], b[1] - a[1]]))
            });
            worst = worst.max(d);
        }
        worst / top
    }
}

impl<T: Real> FlowField<T> for SlicedField<T> {
    fn eval(&self, t: T, x: Vec2<T>) -> Vec2<T> {
        let n = self.slices.len();
        if n == 0 {
            return [T::zero(); 2];
        }
        if n == 1 || t <= self.slices[0].t {
            return self.slices[0].eval(x);
        }
        if t >= self.slices[n - 1].t {
            return self.slices[n - 1].eval(x);
        }
        let k = self.slices.partition_point(|s| s.t <= t).saturating_sub(1).min(n - 2);
        let (a, b) = (&self.slices[k], &self.slices[k + 1]);
        let lam = (t - a.t) / (b.t - a.t);
        let ua = a.eval(x);
        let ub = b.eval(x);
        [ua[0] + lam * (ub[0] - ua[0]), ua[1] + lam * (ub[1] - ua[1])]
    }
}

/// What to do when a step moves further than the displacement limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarseStep {
    /// Fail with [`Error::StepTooCoarse`].
    Error,
    /// Split the step in halves until it complies.
    Subdivide,
}

/// Fixed-step RK4 integrator with window refinement.
#[derive(Clone, Copy, Debug)]
pub struct Integrator<T> {
    /// Step used outside windows (the last step of a gap is shortened to land on its end).
    pub h: T,
    /// Number of RK4 steps spent on a full window.
    pub window_steps: usize,
    /// Largest admissible `|Delta X|` per step.
    pub max_displacement: Option<T>,
    pub on_coarse: CoarseStep,
    /// Bisection tolerance on crossing times.
    pub tol_t: T,
    /// Friction coefficient `lambda` in `V' = lambda (U - V)`.
    pub friction: T,
}

impl<T: Real> Integrator<T> {
    /// Step `horizon / n_steps` with no displacement guard.
    pub fn fixed(horizon: T, n_steps: usize) -> Self {
        Self {
            h: horizon / lit(n_steps as f64),
            window_steps: 32,
            max_displacement: None,
            on_coarse: CoarseStep::Error,
            tol_t: lit(1e-12),
            friction: T::one(),
        }
    }

    /// Adds the displacement guard `r0 / 4` required for reliable crossing detection.
    pub fn guarded(mut self, limit: T, on_coarse: CoarseStep) -> Self {
        self.max_displacement = Some(limit);
        self.on_coarse = on_coarse;
        self
    }

    pub fn with_window_steps(mut self, n: usize) -> Self {
        self.window_steps = n.max(1);
        self
    }

    pub fn with_friction(mut self, lambda: T) -> Self {
        self.friction = lambda;
        self
    }
}

/// One accepted integration step, handed to observers.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo<T> {
    pub t0: T,
    pub t1: T,
    pub x0: Vec2<T>,
    pub x1: Vec2<T>,
    pub v0: Vec2<T>,
    pub v1: Vec2<T>,
}

/// Result of tracing one characteristic.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub x: TorusPoint<T>,
    pub v: Vec2<T>,
    /// Crossings of `S(x0, r0)` sorted by increasing time.
    pub crossings: Vec<SphereCrossing<T>>,
    /// Time at which an observer stopped the trace, if any.
    pub stopped_at: Option<T>,
}

#[inline(always)]
pub fn rk4<T: Real, F: Fn(T, Vec2<T>) -> Vec2<T>>(f: &F, lam: T, tau: T, dt: T, x: Vec2<T>, v: Vec2<T>) -> (Vec2<T>, Vec2<T>) {
    let half = dt * lit(0.5);
    let acc = |tt: T, xx: Vec2<T>, vv: Vec2<T>| {
        let u = f(tt, xx);
        [lam * (u[0] - vv[0]), lam * (u[1] - vv[1])]
    };
    let a1 = acc(tau, x, v);
    let x2 = [x[0] + half * v[0], x[1] + half * v[1]];
    let v2 = [v[0] + half * a1[0], v[1] + half * a1[1]];
    let a2 = acc(tau + half, x2, v2);
    let x3 = [x[0] + half * v2[0], x[1] + half * v2[1]];
    let v3 = [v[0] + half * a2[0], v[1] + half * a2[1]];
    let a3 = acc(tau + half, x3, v3);
    let x4 = [x[0] + dt * v3[0], x[1] + dt * v3[1]];
    let v4 = [v[0] + dt * a3[0], v[1] + dt * a3[1]];
    let a4 = acc(tau + dt, x4, v4);
    let sixth = dt / lit(6.0);
    let two = lit::<T>(2.0);
    (
        [
            x[0] + sixth * (v[0] + two * v2[0] + two * v3[0] + v4[0]),
            x[1] + sixth * (v[1] + two * v2[1] + two * v3[1] + v4[1]),
        ],
        [
            v[0] + sixth * (a1[0] + two * a2[0] + two * a3[0] + a4[0]),
            v[1] + sixth * (a1[1] + two * a2[1] + two * a3[1] + a4[1]),
        ],
    )
}

/// A piece of the integration plan: either a gap in absolute time or a window on its local clock.
#[derive(Clone, Copy, Debug)]
enum Piece<T> {
    Gap { a: T, b: T },
    Win { w: usize, s0: T, s1: T },
}

fn plan<T: Real>(windows: &[Window<T>], s: T, t: T) -> Vec<Piece<T>> {
    let mut out = Vec::new();
    if s == t {
        return out;
    }
    if s < t {
        let mut c = s;
        for (k, w) in windows.iter().enumerate() {
            if w.start >= t {
                break;
            }
            let end = w.start + w.width;
            let (s0, gap_to) = if w.start >= s {
                (T::zero(), Some(w.start))
            } else if end > s {
                (s - w.start, None)
            } else {
                continue;
            };
            if let Some(g) = gap_to {
                if g > c {
                    out.push(Piece::Gap { a: c, b: g });
                }
            }
            let s1 = if end <= t { w.width } else { t - w.start };
            out.push(Piece::Win { w: k, s0, s1 });
            c = if end <= t { end } else { t };
        }
        if t > c {
            out.push(Piece::Gap { a: c, b: t });
        }
    } else {
        let mut c = s;
        for (k, w) in windows.iter().enumerate().rev() {
            let end = w.start + w.width;
            if w.start >= s {
                continue;
            }
            if end <= t && w.start < t {
                break;
            }
            let (s0, gap_to) = if end <= s { (w.width, Some(end)) } else { (s - w.start, None) };
            if let Some(g) = gap_to {
                if g < c {
                    out.push(Piece::Gap { a: c, b: g });
                }
            }
            let (s1, next) = if w.start >= t { (T::zero(), w.start) } else { (t - w.start, t) };
            out.push(Piece::Win { w: k, s0, s1 });
            c = next;
        }
        if t < c {
            out.push(Piece::Gap { a: c, b: t });
        }
    }
    out
}

#[inline(always)]
fn wrap<T: Real>(x: Vec2<T>) -> Vec2<T> {
    [x[0] - x[0].floor(), x[1] - x[1].floor()]
}

struct Stepper<'a, T: Real> {
    integ: &'a Integrator<T>,
    region: Option<&'a ControlRegion<T>>,
    crossings: Vec<SphereCrossing<T>>,
}

impl<'a, T: Real> Stepper<'a, T> {
    /// Advances one step of the local clock `tau` (absolute time `abs(tau)`), honouring the guard.
    #[allow(clippy::too_many_arguments)]
    fn step<F, A>(&mut self, f: &F, abs: &A, tau: T, dt: T, x: Vec2<T>, v: Vec2<T>, depth: u32) -> Result<(Vec2<T>, Vec2<T>)>
    where
        F: Fn(T, Vec2<T>) -> Vec2<T>,
        A: Fn(T) -> T,
    {
        let lam = self.integ.friction;
        let (x1, v1) = rk4(f, lam, tau, dt, x, v);
        if let Some(limit) = self.integ.max_displacement {
            let d = norm([x1[0] - x[0], x1[1] - x[1]]);
            if d > limit {
                if self.integ.on_coarse == CoarseStep::Error || depth > 60 {
                    return Err(Error::StepTooCoarse { displacement: to_f64(d), limit: to_f64(limit) });
                }
                let half = dt * lit(0.5);
                let (xm, vm) = self.step(f, abs, tau, half, x, v, depth + 1)?;
                return self.step(f, abs, tau + half, half, xm, vm, depth + 1);
            }
        }
        if let Some(region) = self.region {
            let phi = |p: Vec2<T>| region.dist_to_center(p) - region.r0;
            let f0 = phi(x);
            let f1 = phi(x1);
            if (f0 < T::zero()) != (f1 < T::zero()) {
                let (mut lo, mut hi) = (T::zero(), T::one());
                let tol = self.integ.tol_t;
                let mut it = 0;
                while (hi - lo) * dt.abs() > tol && it < 200 {
                    let mid = (lo + hi) * lit(0.5);
                    let (xm, _) = rk4(f, lam, tau, dt * mid, x, v);
                    if (phi(xm) < T::zero()) == (f0 < T::zero()) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    it += 1;
                }
                let frac = (lo + hi) * lit(0.5);
                let (xc, vc) = rk4(f, lam, tau, dt * frac, x, v);
                self.crossings.push(classify_crossing(region, abs(tau + dt * frac), xc, vc));
            }
        }
        Ok((x1, v1))
    }
}

/// Traces the characteristic through `(x, v)` at time `s` up to time `t` (either direction).
///
/// When `region` is given, every crossing of `S(x0, r0)` is located by bisection and classified.
/// `observer` sees each accepted step and may stop the trace by returning `false`.
#[allow(clippy::too_many_arguments)]
pub fn trace<T: Real>(
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    s: T,
    t: T,
    x: Vec2<T>,
    v: Vec2<T>,
    region: Option<&ControlRegion<T>>,
    observer: &mut dyn FnMut(&StepInfo<T>) -> bool,
) -> Result<Trace<T>> {
    let mut st = Stepper { integ, region, crossings: Vec::new() };
    let mut x = x;
    let mut v = v;
    let windows = field.windows();
    for piece in plan(windows, s, t) {
        match piece {
            Piece::Gap { a, b } => {
                let n = ((b - a).abs() / integ.h).ceil().max(T::one());
                let steps = n.to_usize().unwrap_or(1);
                let dt = (b - a) / n;
                let f = |tt: T, xx: Vec2<T>| field.eval(tt, xx);
                let abs = |tt: T| tt;
                for k in 0..steps {
                    let t0 = a + dt * lit(k as f64);
                    let t1 = if k + 1 == steps { b } else { t0 + dt };
                    let (x1, v1) = st.step(&f, &abs, t0, t1 - t0, x, v, 0)?;
                    let info = StepInfo { t0, t1, x0: x, x1, v0: v, v1 };
                    x = wrap(x1);
                    v = v1;
                    if !observer(&info) {
                        st.crossings.sort_by(|p, q| p.t.partial_cmp(&q.t).unwrap_or(std::cmp::Ordering::Equal));
                        return Ok(Trace { x: TorusPoint::from_vec(x), v, crossings: st.crossings, stopped_at: Some(t1) });
                    }
                }
            }
            Piece::Win { w, s0, s1 } => {
                let win = windows[w];
                let frac = ((s1 - s0) / win.width).abs();
                let n = (frac * lit(integ.window_steps as f64)).ceil().max(T::one());
                let steps = n.to_usize().unwrap_or(1);
                let ds = (s1 - s0) / n;
                let f = |sig: T, xx: Vec2<T>| {
                    let a = field.eval(win.start + sig, xx);
                    let b = field.eval_window(w, sig, xx);
                    [a[0] + b[0], a[1] + b[1]]
                };
                let abs = |sig: T| win.start + sig;
                for k in 0..steps {
                    let sg0 = s0 + ds * lit(k as f64);
                    let sg1 = if k + 1 == steps { s1 } else { sg0 + ds };
                    let (x1, v1) = st.step(&f, &abs, sg0, sg1 - sg0, x, v, 0)?;
                    let info = StepInfo { t0: win.start + sg0, t1: win.start + sg1, x0: x, x1, v0: v, v1 };
                    x = wrap(x1);
                    v = v1;
                    if !observer(&info) {
                        st.crossings.sort_by(|p, q| p.t.partial_cmp(&q.t).unwrap_or(std::cmp::Ordering::Equal));
                        return Ok(Trace { x: TorusPoint::from_vec(x), v, crossings: st.crossings, stopped_at: Some(info.t1) });
                    }
                }
            }
        }
    }
    st.crossings.sort_by(|p, q| p.t.partial_cmp(&q.t).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Trace { x: TorusPoint::from_vec(x), v, crossings: st.crossings, stopped_at: None })
}

/// Multiplicative weight attached to one sphere crossing.
pub trait CrossingWeight<T>: Sync {
    fn factor(&self, c: &SphereCrossing<T>) -> T;
}

/// Endpoint of a flow together with the accumulated absorption factor.
#[derive(Clone, Debug)]
pub struct FlowResult<T> {
    pub x: TorusPoint<T>,
    pub v: Vec2<T>,
    pub factor: T,
    pub crossings: Vec<SphereCrossing<T>>,
}

/// `(X, V)(t, s, x, v)`: the state at time `t` of the characteristic through `(x, v)` at time `s`.
#[allow(clippy::too_many_arguments)]
pub fn flow_map<T: Real>(
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    t: T,
    s: T,
    x: TorusPoint<T>,
    v: Vec2<T>,
    absorption: Option<(&ControlRegion<T>, &dyn CrossingWeight<T>)>,
) -> Result<FlowResult<T>> {
    let region = absorption.map(|(r, _)| r);
    let tr = trace(field, integ, s, t, x.as_vec(), v, region, &mut |_| true)?;
    let factor = match absorption {
        Some((_, w)) => tr.crossings.iter().fold(T::one(), |p, c| p * w.factor(c)),
        None => T::one(),
    };
    Ok(FlowResult { x: tr.x, v: tr.v, factor, crossings: tr.crossings })
}

/// Closed-form flow for `U = 0`: `(x + (1 - e^{s-t}) v, e^{s-t} v)`.
pub fn free_flow<T: Real>(t: T, s: T, x: Vec2<T>, v: Vec2<T>) -> (TorusPoint<T>, Vec2<T>) {
    let e = (s - t).exp();
    let c = T::one() - e;
    (TorusPoint::new(x[0] + c * v[0], x[1] + c * v[1]), [e * v[0], e * v[1]])
}

/// Closed-form flow for a constant field `c`: `V = c + e^{s-t}(v - c)`, `X = x + c (t-s) + (1 - e^{s-t})(v - c)`.
pub fn constant_field_flow<T: Real>(c: Vec2<T>, t: T, s: T, x: Vec2<T>, v: Vec2<T>) -> (TorusPoint<T>, Vec2<T>) {
    let e = (s - t).exp();
    let d = t - s;
    let w = [v[0] - c[0], v[1] - c[1]];
    let om = T::one() - e;
    (
        TorusPoint::new(x[0] + c[0] * d + om * w[0], x[1] + c[1] * d + om * w[1]),
        [c[0] + e * w[0], c[1] + e * w[1]],
    )
}

/// Exact free transport `e^{2t} f0(x + (1 - e^t) v, e^t v)`.
pub fn free_transport_exact<T: Real, F: Fn(Vec2<T>, Vec2<T>) -> T>(f0: F, t: T, x: Vec2<T>, v: Vec2<T>) -> T {
    let (xb, vb) = free_flow(T::zero(), t, x, v);
    (lit::<T>(2.0) * t).exp() * f0(xb.as_vec(), vb)
}

/// Arguments `(t, s, x, v)` of one flow evaluation.
#[derive(Clone, Copy, Debug)]
pub struct FlowArgs<T> {
    pub t: T,
    pub s: T,
    pub x: TorusPoint<T>,
    pub v: Vec2<T>,
}

fn args_distance<T: Real>(a: &FlowArgs<T>, b: &FlowArgs<T>) -> T {
    let dx = torus_delta(a.x.as_vec(), b.x.as_vec());
    let parts = [a.t - b.t, a.s - b.s, dx[0], dx[1], a.v[0] - b.v[0], a.v[1] - b.v[1]];
    parts.iter().fold(T::zero(), |acc, &p| acc + p * p).sqrt()
}

/// Worst ratio `|Delta (X, V)| / ((1 + |v|) |Delta (t, s, x, v)|)` over sample pairs.
///
/// Identical pairs are skipped. Pairs are expected to satisfy `|v - v'| < 1`.
pub fn lipschitz_probe<T: Real>(
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    pairs: &[(FlowArgs<T>, FlowArgs<T>)],
) -> Result<T> {
    let mut worst = T::zero();
    for (a, b) in pairs {
        let d_in = args_distance(a, b);
        if d_in == T::zero() {
            continue;
        }
        let fa = flow_map(field, integ, a.t, a.s, a.x, a.v, None)?;
        let fb = flow_map(field, integ, b.t, b.s, b.x, b.v, None)?;
        let dx = torus_delta(fa.x.as_vec(), fb.x.as_vec());
        let dv = [fa.v[0] - fb.v[0], fa.v[1] - fb.v[1]];
        let d_out = (dx[0] * dx[0] + dx[1] * dx[1] + dv[0] * dv[0] + dv[1] * dv[1]).sqrt();
        worst = worst.max(d_out / ((T::one() + norm(a.v)) * d_in));
    }
    Ok(worst)
}

/// `max | e^t |v| - |V(0, t, x, v)| |` over samples `(t, x, v)`.
pub fn velocity_drift_check<T: Real>(
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    samples: &[(T, TorusPoint<T>, Vec2<T>)],
) -> Result<T> {
    let mut worst = T::zero();
    for &(t, x, v) in samples {
        let r = flow_map(field, integ, T::zero(), t, x, v, None)?;
        worst = worst.max((t.exp() * norm(v) - norm(r.v)).abs());
    }
    Ok(worst)
}

/// `e^{2 lambda t} f0((X, V)(0, t, x, v))` times the absorption factors of the crossings met on the way.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_transport_with<T: Real, F: Fn(Vec2<T>, Vec2<T>) -> T>(
    f0: F,
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    absorption: Option<(&ControlRegion<T>, &dyn CrossingWeight<T>)>,
    t: T,
    x: TorusPoint<T>,
    v: Vec2<T>,
) -> Result<T> {
    if t == T::zero() {
        return Ok(f0(x.as_vec(), v));
    }
    let r = flow_map(field, integ, T::zero(), t, x, v, absorption)?;
    Ok((lit::<T>(2.0) * integ.friction * t).exp() * f0(r.x.as_vec(), r.v) * r.factor)
}

/// [`evaluate_transport_with`] for gridded initial data (cubic interpolation, zero off the box).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_transport<T: Real>(
    f0: &DistributionField<T>,
    field: &dyn FlowField<T>,
    integ: &Integrator<T>,
    absorption: Option<(&ControlRegion<T>, &dyn CrossingWeight<T>)>,
    t: T,
    x: TorusPoint<T>,
    v: Vec2<T>,
) -> Result<T> {
    evaluate_transport_with(|a, b| f0.interpolate(a, b), field, integ, absorption, t, x, v)
}
