//! Geometry of the flat torus `R^2 / Z^2`: distances, the control ball,
//! bad directions and sphere-crossing detection along sampled paths.

use crate::error::{Error, Result};
use crate::scalar::{dot, lit, norm, Real, Vec2};

/// A point of the unit torus with both coordinates reduced to `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint<T> {
    pub x1: T,
    pub x2: T,
}

#[inline(always)]
fn reduce<T: Real>(a: T) -> T {
    let r = a - a.floor();
    // `a - floor(a)` can round up to exactly 1 for tiny negative inputs.
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Wraps a coordinate difference into `[-1/2, 1/2)`.
#[inline(always)]
pub fn wrap_delta<T: Real>(d: T) -> T {
    let half = lit::<T>(0.5);
    d - (d + half).floor()
}

impl<T: Real> TorusPoint<T> {
    pub fn new(x1: T, x2: T) -> Self {
        Self { x1: reduce(x1), x2: reduce(x2) }
    }

    pub fn from_vec(x: Vec2<T>) -> Self {
        Self::new(x[0], x[1])
    }

    pub fn as_vec(self) -> Vec2<T> {
        [self.x1, self.x2]
    }

    /// Translate by a vector of `R^2` and reduce.
    pub fn shifted(self, d: Vec2<T>) -> Self {
        Self::new(self.x1 + d[0], self.x2 + d[1])
    }
}

/// Minimal-image displacement `b - a`, each component in `[-1/2, 1/2)`.
#[inline(always)]
pub fn torus_delta<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [wrap_delta(b[0] - a[0]), wrap_delta(b[1] - a[1])]
}

/// Distance on the torus: the minimum over lattice translates of the Euclidean distance.
pub fn torus_dist<T: Real>(a: TorusPoint<T>, b: TorusPoint<T>) -> T {
    norm(torus_delta(a.as_vec(), b.as_vec()))
}

/// Same as [`torus_dist`] for raw (unreduced) coordinates.
#[inline(always)]
pub fn torus_dist_vec<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    norm(torus_delta(a, b))
}

/// Ball `B(x0, r0)` where absorption happens; the control set is `B(x0, 2 r0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlRegion<T> {
    pub x0: TorusPoint<T>,
    pub r0: T,
}

impl<T: Real> ControlRegion<T> {
    /// Builds a region whose enlarged ball `B(x0, 2 r0)` embeds in the torus.
    pub fn new(x0: TorusPoint<T>, r0: T) -> Result<Self> {
        if !(r0 > T::zero()) || !(lit::<T>(2.0) * r0 < lit(0.5)) {
            return Err(Error::InvalidConfig(format!(
                "control radius r0 = {r0} must satisfy 0 < 2 r0 < 1/2"
            )));
        }
        Ok(Self { x0, r0 })
    }

    /// Radius of the control set `omega`.
    pub fn omega_radius(&self) -> T {
        lit::<T>(2.0) * self.r0
    }

    pub fn dist_to_center(&self, x: Vec2<T>) -> T {
        torus_dist_vec(self.x0.as_vec(), x)
    }

    /// Whether `x` lies in the open control set `B(x0, 2 r0)`.
    pub fn in_omega(&self, x: Vec2<T>) -> bool {
        self.dist_to_center(x) < self.omega_radius()
    }

    /// Outward unit normal of `S(x0, r0)` through the (non-central) point `x`.
    pub fn outward_normal(&self, x: Vec2<T>) -> Vec2<T> {
        let d = torus_delta(self.x0.as_vec(), x);
        let n = norm(d);
        [d[0] / n, d[1] / n]
    }
}

/// Tolerance used when a direction family touches the ball tangentially.
pub const TANGENCY_TOL: f64 = 1e-12;

/// Greatest common divisor of two non-negative integers.
pub fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Rational directions `(p, q)` whose closed geodesics avoid the open ball of radius `rho`.
///
/// Parallel closed geodesics with primitive direction `(p, q)` are spaced
/// `1 / sqrt(p^2 + q^2)` apart, so the farthest one from the ball center sits at
/// half that spacing. Irrational directions are dense and never avoid a ball.
pub fn bad_lattice_directions(rho: f64) -> Vec<(i64, i64)> {
    if !(rho > 0.0) {
        return Vec::new();
    }
    let cutoff = (1.0 / (2.0 * rho)).floor() as i64 + 1;
    let mut out = Vec::new();
    for p in -cutoff..=cutoff {
        for q in -cutoff..=cutoff {
            if (p, q) == (0, 0) || gcd(p, q) != 1 {
                continue;
            }
            let len = ((p * p + q * q) as f64).sqrt();
            if 2.0 * rho * len <= 1.0 + TANGENCY_TOL {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| {
        let ta = (a.1 as f64).atan2(a.0 as f64);
        let tb = (b.1 as f64).atan2(b.0 as f64);
        ta.partial_cmp(&tb).expect("finite angles")
    });
    out
}

/// Unit directions whose forward rays can avoid `B(x0, r0/4)`, sorted by angle.
pub fn bad_directions<T: Real>(region: &ControlRegion<T>) -> Vec<Vec2<T>> {
    bad_directions_for_radius(region.r0 / lit(4.0))
}

/// Bad directions for an avoided ball of radius `rho`.
pub fn bad_directions_for_radius<T: Real>(rho: T) -> Vec<Vec2<T>> {
    bad_lattice_directions(crate::scalar::to_f64(rho))
        .into_iter()
        .map(|(p, q)| {
            let l = ((p * p + q * q) as f64).sqrt();
            [lit(p as f64 / l), lit(q as f64 / l)]
        })
        .collect()
}

/// Incidence class of a crossing of `S(x0, r0)`; each class implies the weaker ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GammaClass {
    NotIncoming,
    Minus,
    Minus2,
    Minus3,
    Minus4,
}

impl GammaClass {
    /// Strongest class satisfied by a velocity with normal component `u = <v, nu>` and speed `s`.
    pub fn classify<T: Real>(u: T, s: T) -> Self {
        let tests: [(f64, f64, GammaClass); 4] = [
            (2.5, 4.0, GammaClass::Minus4),
            (2.0, 5.0, GammaClass::Minus3),
            (1.0, 8.0, GammaClass::Minus2),
            (0.5, 10.0, GammaClass::Minus),
        ];
        for (floor, div, class) in tests {
            if s >= lit(floor) && u <= -s / lit(div) {
                return class;
            }
        }
        GammaClass::NotIncoming
    }

    pub fn in_gamma_minus(self) -> bool {
        self >= GammaClass::Minus
    }
    pub fn in_gamma2(self) -> bool {
        self >= GammaClass::Minus2
    }
    pub fn in_gamma3(self) -> bool {
        self >= GammaClass::Minus3
    }
    pub fn in_gamma4(self) -> bool {
        self >= GammaClass::Minus4
    }
}

/// Relative size of `|<v, nu>|` below which a crossing counts as grazing.
pub const GRAZING_TOL: f64 = 1e-6;

/// A transversal passage of a trajectory through `S(x0, r0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereCrossing<T> {
    pub t: T,
    pub x: TorusPoint<T>,
    pub v: Vec2<T>,
    pub gamma_class: GammaClass,
    /// Set when `|<v, nu>| < GRAZING_TOL |v|`; such crossings are never absorbing.
    pub grazing: bool,
}

/// Classifies a point of the sphere with velocity `v`.
pub fn classify_crossing<T: Real>(region: &ControlRegion<T>, t: T, x: Vec2<T>, v: Vec2<T>) -> SphereCrossing<T> {
    let nu = region.outward_normal(x);
    let u = dot(v, nu);
    let s = norm(v);
    let grazing = u.abs() < lit::<T>(GRAZING_TOL) * s;
    let gamma_class = if grazing { GammaClass::NotIncoming } else { GammaClass::classify(u, s) };
    SphereCrossing { t, x: TorusPoint::from_vec(x), v, gamma_class, grazing }
}

/// One sample `(t, x, v)` of a trajectory; `x` is unwrapped or wrapped, either works.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample<T> {
    pub t: T,
    pub x: Vec2<T>,
    pub v: Vec2<T>,
}

/// Cubic Hermite reconstruction of a path between two samples, using `v = dx/dt`.
fn hermite<T: Real>(a: &PathSample<T>, b: &PathSample<T>, t: T) -> (Vec2<T>, Vec2<T>) {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let one = T::one();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + one;
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    let d00 = (lit::<T>(6.0) * s2 - lit::<T>(6.0) * s) / h;
    let d10 = three * s2 - lit::<T>(4.0) * s + one;
    let d01 = -d00;
    let d11 = three * s2 - two * s;
    // Unwrap b relative to a so the interpolant never jumps across the fundamental cell.
    let db = torus_delta(a.x, b.x);
    let bx = [a.x[0] + db[0], a.x[1] + db[1]];
    let mut x = [T::zero(); 2];
    let mut v = [T::zero(); 2];
    for k in 0..2 {
        x[k] = h00 * a.x[k] + h10 * h * a.v[k] + h01 * bx[k] + h11 * h * b.v[k];
        v[k] = d00 * a.x[k] + d10 * a.v[k] + d01 * bx[k] + d11 * b.v[k];
    }
    (x, v)
}

/// Sign changes of `dist(x(t), x0) - r0` along a sampled path, refined by bisection to `tol_t`.
///
/// The path must advance less than `r0 / 4` between consecutive samples; otherwise
/// a chord through the ball could be missed and [`Error::StepTooCoarse`] is returned.
pub fn detect_crossings<T: Real>(
    traj: &[PathSample<T>],
    region: &ControlRegion<T>,
    tol_t: T,
) -> Result<Vec<SphereCrossing<T>>> {
    let mut out = Vec::new();
    let quarter = region.r0 / lit(4.0);
    for w in traj.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if norm(torus_delta(a.x, b.x)) >= quarter {
            return Err(Error::StepTooCoarse {
                displacement: crate::scalar::to_f64(norm(torus_delta(a.x, b.x))),
                limit: crate::scalar::to_f64(quarter),
            });
        }
        let phi = |x: Vec2<T>| region.dist_to_center(x) - region.r0;
        let fa = phi(a.x);
        let fb = phi(b.x);
        if (fa < T::zero()) == (fb < T::zero()) {
            continue;
        }
        let (mut lo, mut hi) = (a.t, b.t);
        let mut flo = fa;
        while (hi - lo).abs() > tol_t {
            let mid = (lo + hi) / lit(2.0);
            let (xm, _) = hermite(a, b, mid);
            let fm = phi(xm);
            if (fm < T::zero()) == (flo < T::zero()) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let tc = (lo + hi) / lit(2.0);
        let (xc, vc) = hermite(a, b, tc);
        out.push(classify_crossing(region, tc, xc, vc));
    }
    Ok(out)
}

/// Whether the short segment from `a` to `a + d` meets the open ball `B(c, r)` on the torus.
///
/// Only the nearest image of `c` is tested, which is exact for segments shorter than `1/2 - r`.
pub fn segment_hits_ball<T: Real>(a: Vec2<T>, d: Vec2<T>, c: Vec2<T>, r: T) -> bool {
    let rel = torus_delta(c, a);
    let dd = dot(d, d);
    let s = if dd > T::zero() {
        (-dot(rel, d) / dd).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    norm([rel[0] + s * d[0], rel[1] + s * d[1]]) < r
}

/// Smallest fraction `s in [0, 1]` such that `a + s d` lies in the closed ball `B(c, r)` on the torus.
///
/// The segment may be arbitrarily long (it is walked in pieces of length at most 1/4); `r < 1/4`.
pub fn first_ball_hit<T: Real>(a: Vec2<T>, d: Vec2<T>, c: Vec2<T>, r: T) -> Option<T> {
    let len = norm(d);
    let pieces = (len / lit::<T>(0.25)).ceil().max(T::one());
    let n = pieces.to_usize().unwrap_or(1);
    let r2 = r * r;
    for k in 0..n {
        let s0 = lit::<T>(k as f64) / pieces;
        let s1 = lit::<T>((k + 1) as f64) / pieces;
        let p = [a[0] + s0 * d[0], a[1] + s0 * d[1]];
        let q = [(s1 - s0) * d[0], (s1 - s0) * d[1]];
        let rel = torus_delta(c, p);
        let qq = dot(q, q);
        let mut best: Option<T> = None;
        for i in -1i32..=1 {
            for j in -1i32..=1 {
                let w = [rel[0] - lit(i as f64), rel[1] - lit(j as f64)];
                let ww = dot(w, w);
                let hit = if ww <= r2 {
                    Some(T::zero())
                } else if qq > T::zero() {
                    let b = dot(w, q);
                    let disc = b * b - qq * (ww - r2);
                    if disc < T::zero() || b >= T::zero() {
                        None
                    } else {
                        let s = (-b - disc.sqrt()) / qq;
                        (s <= T::one()).then_some(s)
                    }
                } else {
                    None
                };
                if let Some(s) = hit {
                    best = Some(best.map_or(s, |b: T| b.min(s)));
                }
            }
        }
        if let Some(s) = best {
            return Some(s0 + s * (s1 - s0));
        }
    }
    None
}
