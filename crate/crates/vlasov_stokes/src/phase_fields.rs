//! Phase-space grids, distribution and velocity fields, interpolation, moments and norms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{lit, norm, Real, Vec2};

/// Uniform grid on `T^2 x [-Vmax, Vmax]^2`.
///
/// Space nodes sit at `i / Nx`; velocity nodes are cell centred at
/// `-Vmax + (j + 1/2) dv`, so the node set is symmetric under `v -> -v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid<T> {
    pub nx: usize,
    pub nv: usize,
    pub vmax: T,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(nx: usize, nv: usize, vmax: T) -> Result<Self> {
        for (name, n) in [("Nx", nx), ("Nv", nv)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!("{name} = {n} must be a power of two >= 16")));
            }
        }
        if !(vmax >= lit(4.0)) {
            return Err(Error::InvalidConfig(format!("Vmax = {vmax} must be at least 4")));
        }
        Ok(Self { nx, nv, vmax })
    }

    pub fn dx(&self) -> T {
        T::one() / lit(self.nx as f64)
    }

    pub fn dv(&self) -> T {
        lit::<T>(2.0) * self.vmax / lit(self.nv as f64)
    }

    pub fn x_node(&self, i: usize) -> T {
        lit::<T>(i as f64) * self.dx()
    }

    pub fn v_node(&self, j: usize) -> T {
        -self.vmax + (lit::<T>(j as f64) + lit(0.5)) * self.dv()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nx * self.nv * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space_len(&self) -> usize {
        self.nx * self.nx
    }

    pub fn velocity_len(&self) -> usize {
        self.nv * self.nv
    }

    #[inline(always)]
    pub fn index(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> usize {
        ((i1 * self.nx + i2) * self.nv + j1) * self.nv + j2
    }

    /// Inverse of [`PhaseGrid::index`].
    #[inline(always)]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize, usize) {
        let j2 = idx % self.nv;
        let r = idx / self.nv;
        let j1 = r % self.nv;
        let r = r / self.nv;
        (r / self.nx, r % self.nx, j1, j2)
    }

    /// Phase-space coordinates of a flat index.
    #[inline(always)]
    pub fn node(&self, idx: usize) -> (Vec2<T>, Vec2<T>) {
        let (i1, i2, j1, j2) = self.unindex(idx);
        ([self.x_node(i1), self.x_node(i2)], [self.v_node(j1), self.v_node(j2)])
    }

    /// Quadrature weight of one phase-space cell.
    pub fn cell_volume(&self) -> T {
        let dx = self.dx();
        let dv = self.dv();
        dx * dx * dv * dv
    }
}

/// A distribution function sampled on a [`PhaseGrid`] at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField<T> {
    pub grid: PhaseGrid<T>,
    pub values: Vec<T>,
    pub t: T,
}

impl<T: Real> DistributionField<T> {
    pub fn zeros(grid: PhaseGrid<T>, t: T) -> Self {
        Self { grid, values: vec![T::zero(); grid.len()], t }
    }

    /// Samples `f(x, v)` at every node (in parallel).
    pub fn from_fn<F>(grid: PhaseGrid<T>, t: T, f: F) -> Self
    where
        F: Fn(Vec2<T>, Vec2<T>) -> T + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (x, v) = grid.node(idx);
                f(x, v)
            })
            .collect();
        Self { grid, values, t }
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn get(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> T {
        self.values[self.grid.index(i1, i2, j1, j2)]
    }

    /// Largest `|f|` on the shell `|v| > frac * Vmax`; used to monitor velocity truncation.
    pub fn boundary_mass(&self, frac: T) -> T {
        let g = self.grid;
        let cut = frac * g.vmax;
        let mut m = T::zero();
        for (idx, &a) in self.values.iter().enumerate() {
            let (_, v) = g.node(idx);
            if norm(v) > cut {
                m = m.max(a.abs());
            }
        }
        m
    }

    /// Cubic interpolation at an arbitrary phase-space point (see [`interpolate`]).
    pub fn interpolate(&self, x: Vec2<T>, v: Vec2<T>) -> T {
        interpolate(self, x, v)
    }
}

/// Weights of the 4-point Lagrange stencil at nodes `i-1, i, i+1, i+2` for offset `s` in `[0, 1)`.
#[inline(always)]
pub fn cubic_weights<T: Real>(s: T) -> [T; 4] {
    let one = T::one();
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let sp1 = s + one;
    let sm1 = s - one;
    let sm2 = s - two;
    [
        -s * sm1 * sm2 / six,
        sp1 * sm1 * sm2 / two,
        -sp1 * s * sm2 / two,
        sp1 * s * sm1 / six,
    ]
}

/// Stencil description along one axis: first node index (possibly out of range) and weights.
#[derive(Clone, Copy, Debug)]
pub struct Stencil<T> {
    pub first: isize,
    pub w: [T; 4],
}

#[inline(always)]
pub fn periodic_stencil<T: Real>(x: T, n: usize) -> Stencil<T> {
    let p = (x - x.floor()) * lit(n as f64);
    let i = p.floor();
    let s = p - i;
    let i = i.to_isize().unwrap_or(0);
    Stencil { first: i - 1, w: cubic_weights(s) }
}

#[inline(always)]
fn velocity_stencil<T: Real>(v: T, vmax: T, dv: T) -> Stencil<T> {
    let p = (v + vmax) / dv - lit(0.5);
    let i = p.floor();
    let s = p - i;
    let i = i.to_isize().unwrap_or(isize::MIN / 2);
    Stencil { first: i - 1, w: cubic_weights(s) }
}

/// Tensor-product cubic interpolation: periodic in `x`, zero outside the velocity box.
///
/// Reproduces node values exactly and cubic polynomials in every variable.
pub fn interpolate<T: Real>(f: &DistributionField<T>, x: Vec2<T>, v: Vec2<T>) -> T {
    let g = &f.grid;
    if v[0].abs() > g.vmax || v[1].abs() > g.vmax {
        return T::zero();
    }
    let dv = g.dv();
    let sx1 = periodic_stencil(x[0], g.nx);
    let sx2 = periodic_stencil(x[1], g.nx);
    let sv1 = velocity_stencil(v[0], g.vmax, dv);
    let sv2 = velocity_stencil(v[1], g.vmax, dv);
    let nx = g.nx as isize;
    let nv = g.nv as isize;
    let mut acc = T::zero();
    for a in 0..4 {
        let i1 = (sx1.first + a as isize).rem_euclid(nx) as usize;
        let mut acc1 = T::zero();
        for b in 0..4 {
            let i2 = (sx2.first + b as isize).rem_euclid(nx) as usize;
            let base = (i1 * g.nx + i2) * g.nv * g.nv;
            let mut acc2 = T::zero();
            for c in 0..4 {
                let j1 = sv1.first + c as isize;
                if j1 < 0 || j1 >= nv {
                    continue;
                }
                let row = base + j1 as usize * g.nv;
                let mut acc3 = T::zero();
                for d in 0..4 {
                    let j2 = sv2.first + d as isize;
                    if j2 < 0 || j2 >= nv {
                        continue;
                    }
                    acc3 = acc3 + sv2.w[d] * f.values[row + j2 as usize];
                }
                acc2 = acc2 + sv1.w[c] * acc3;
            }
            acc1 = acc1 + sx2.w[b] * acc2;
        }
        acc = acc + sx1.w[a] * acc1;
    }
    acc
}

/// Time-stamped vector field on the spatial part of a grid (`Nx x Nx` nodes, row-major in `(x1, x2)`).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField<T> {
    pub nx: usize,
    pub values: Vec<Vec2<T>>,
    pub t: T,
}

impl<T: Real> VelocityField<T> {
    pub fn zeros(nx: usize, t: T) -> Self {
        Self { nx, values: vec![[T::zero(); 2]; nx * nx], t }
    }

    pub fn from_fn<F: Fn(Vec2<T>) -> Vec2<T>>(nx: usize, t: T, f: F) -> Self {
        let h = T::one() / lit(nx as f64);
        let mut values = Vec::with_capacity(nx * nx);
        for i1 in 0..nx {
            for i2 in 0..nx {
                values.push(f([lit::<T>(i1 as f64) * h, lit::<T>(i2 as f64) * h]));
            }
        }
        Self { nx, values, t }
    }

    pub fn component(&self, k: usize) -> Vec<T> {
        self.values.iter().map(|u| u[k]).collect()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, u| m.max(norm(*u)))
    }

    /// Spatial mean `int U dx`.
    pub fn mean(&self) -> Vec2<T> {
        let n = lit::<T>((self.nx * self.nx) as f64);
        let s = self.values.iter().fold([T::zero(); 2], |a, u| [a[0] + u[0], a[1] + u[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Bicubic periodic interpolation.
    pub fn eval(&self, x: Vec2<T>) -> Vec2<T> {
        let s1 = periodic_stencil(x[0], self.nx);
        let s2 = periodic_stencil(x[1], self.nx);
        let n = self.nx as isize;
        let mut out = [T::zero(); 2];
        for a in 0..4 {
            let i1 = (s1.first + a as isize).rem_euclid(n) as usize;
            let mut row = [T::zero(); 2];
            for b in 0..4 {
                let i2 = (s2.first + b as isize).rem_euclid(n) as usize;
                let u = self.values[i1 * self.nx + i2];
                row[0] = row[0] + s2.w[b] * u[0];
                row[1] = row[1] + s2.w[b] * u[1];
            }
            out[0] = out[0] + s1.w[a] * row[0];
            out[1] = out[1] + s1.w[a] * row[1];
        }
        out
    }
}

/// Density, current, mass and momentum of a distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRecord<T> {
    pub t: T,
    pub rho: Vec<T>,
    pub j: Vec<Vec2<T>>,
    pub mass: T,
    pub momentum: Vec2<T>,
}

impl<T: Real> MomentRecord<T> {
    pub fn max_abs_rho(&self) -> T {
        self.rho.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// Current density as a [`VelocityField`] (the Stokes source).
    pub fn current(&self, nx: usize) -> VelocityField<T> {
        VelocityField { nx, values: self.j.clone(), t: self.t }
    }
}

/// Velocity moments by the (cell-centred) trapezoidal rule on the box, all in one pass.
pub fn moments<T: Real>(f: &DistributionField<T>) -> MomentRecord<T> {
    let g = f.grid;
    let dv = g.dv();
    let dv2 = dv * dv;
    let vs: Vec<T> = (0..g.nv).map(|j| g.v_node(j)).collect();
    let per_x: Vec<(T, Vec2<T>)> = f
        .values
        .par_chunks(g.velocity_len())
        .map(|block| {
            let mut r = T::zero();
            let mut j = [T::zero(); 2];
            for (j1, row) in block.chunks(g.nv).enumerate() {
                let mut rrow = T::zero();
                let mut j2acc = T::zero();
                for (j2, &a) in row.iter().enumerate() {
                    rrow = rrow + a;
                    j2acc = j2acc + vs[j2] * a;
                }
                r = r + rrow;
                j[0] = j[0] + vs[j1] * rrow;
                j[1] = j[1] + j2acc;
            }
            (r * dv2, [j[0] * dv2, j[1] * dv2])
        })
        .collect();
    let dx2 = g.dx() * g.dx();
    let mut mass = T::zero();
    let mut mom = [T::zero(); 2];
    let mut rho = Vec::with_capacity(per_x.len());
    let mut j = Vec::with_capacity(per_x.len());
    for (r, c) in per_x {
        mass = mass + r;
        mom[0] = mom[0] + c[0];
        mom[1] = mom[1] + c[1];
        rho.push(r);
        j.push(c);
    }
    MomentRecord { t: f.t, rho, j, mass: mass * dx2, momentum: [mom[0] * dx2, mom[1] * dx2] }
}

/// `max over nodes of (1 + |v|)^(gamma + 2) |f|`.
pub fn weighted_sup_norm<T: Real>(f: &DistributionField<T>, gamma: T) -> T {
    let g = f.grid;
    let p = gamma + lit(2.0);
    let weights: Vec<T> = (0..g.velocity_len())
        .map(|k| (T::one() + norm([g.v_node(k / g.nv), g.v_node(k % g.nv)])).powf(p))
        .collect();
    f.values
        .par_chunks(g.velocity_len())
        .map(|block| block.iter().zip(&weights).fold(T::zero(), |m, (&a, &w)| m.max(w * a.abs())))
        .reduce(T::zero, |a, b| a.max(b))
}

/// One axis of a sampled array for [`holder_seminorm`].
#[derive(Clone, Copy, Debug)]
pub struct Axis<T> {
    pub len: usize,
    pub step: T,
    pub periodic: bool,
}

/// Nearest-neighbour estimate of the Hölder seminorm of exponent `sigma`.
///
/// `values` is a row-major array with the given axes. The estimate is the maximum of
/// `|f(p) - f(q)| / |p - q|^sigma` over node pairs adjacent along one axis, which is a
/// lower bound for the true seminorm.
pub fn holder_seminorm<T: Real>(values: &[T], axes: &[Axis<T>], sigma: T) -> T {
    let total: usize = axes.iter().map(|a| a.len).product();
    assert_eq!(total, values.len(), "shape does not match the sample count");
    let mut strides = vec![1usize; axes.len()];
    for k in (0..axes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].len;
    }
    let mut best = T::zero();
    for (k, ax) in axes.iter().enumerate() {
        if ax.len < 2 {
            continue;
        }
        let denom = ax.step.powf(sigma);
        let stride = strides[k];
        let best_k = (0..total)
            .into_par_iter()
            .map(|idx| {
                let pos = (idx / stride) % ax.len;
                let nb = if pos + 1 < ax.len {
                    idx + stride
                } else if ax.periodic {
                    idx + stride - ax.len * stride
                } else {
                    return T::zero();
                };
                (values[nb] - values[idx]).abs() / denom
            })
            .reduce(T::zero, |a, b| a.max(b));
        best = best.max(best_k);
    }
    best
}

/// Hölder estimate over a time series of distribution slices spaced `dt` apart.
pub fn holder_seminorm_series<T: Real>(series: &[DistributionField<T>], dt: T, sigma: T) -> T {
    if series.is_empty() {
        return T::zero();
    }
    let g = series[0].grid;
    let values: Vec<T> = series.iter().flat_map(|f| f.values.iter().copied()).collect();
    let axes = [
        Axis { len: series.len(), step: dt, periodic: false },
        Axis { len: g.nx, step: g.dx(), periodic: true },
        Axis { len: g.nx, step: g.dx(), periodic: true },
        Axis { len: g.nv, step: g.dv(), periodic: false },
        Axis { len: g.nv, step: g.dv(), periodic: false },
    ];
    holder_seminorm(&values, &axes, sigma)
}
