//! Stationary Stokes problem `-Delta U + grad p = j`, `div U = 0` on the torus, solved
//! mode by mode in Fourier space, plus spectral calculus helpers.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::phase_fields::VelocityField;
use crate::scalar::{lit, to_f64, Real, Vec2};

/// Forward/inverse 2-D FFT on an `n x n` periodic grid (row-major).
///
/// Forward transforms return Fourier coefficients normalised so that
/// `u(x) = sum_k u_k exp(2 pi i k.x)`.
#[derive(Clone)]
pub struct Spectral2d<T: Real> {
    pub n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Spectral2d<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2d").field("n", &self.n).finish()
    }
}

impl<T: Real> Spectral2d<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex::new(T::zero(), T::zero()); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            plan.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }

    pub fn forward_real(&self, u: &[T]) -> Vec<Complex<T>> {
        let scale = T::one() / lit((self.n * self.n) as f64);
        let mut data: Vec<Complex<T>> = u.iter().map(|&a| Complex::new(a * scale, T::zero())).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    pub fn forward(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        let scale = T::one() / lit((self.n * self.n) as f64);
        let mut data: Vec<Complex<T>> = u.iter().map(|&a| a * scale).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, uh: &[Complex<T>]) -> Vec<T> {
        let mut data = uh.to_vec();
        self.transform(&mut data, &self.inv);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Signed integer wavenumber of index `i` (Nyquist maps to `-n/2`).
    #[inline(always)]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wavenumber used by odd-order derivatives; the Nyquist mode is dropped.
    #[inline(always)]
    pub fn odd_wavenumber(&self, i: usize) -> i64 {
        if 2 * i == self.n {
            0
        } else {
            self.wavenumber(i)
        }
    }

    /// `(k1, k2)` and the odd-derivative variant for a flat index.
    #[inline(always)]
    pub fn modes(&self, idx: usize) -> (Vec2<T>, Vec2<T>) {
        let (a, b) = (idx / self.n, idx % self.n);
        (
            [lit(self.wavenumber(a) as f64), lit(self.wavenumber(b) as f64)],
            [lit(self.odd_wavenumber(a) as f64), lit(self.odd_wavenumber(b) as f64)],
        )
    }

    /// Spectral partial derivative `d/dx_axis` of a real periodic field.
    pub fn derivative(&self, u: &[T], axis: usize) -> Vec<T> {
        let mut uh = self.forward_real(u);
        let tpi = lit::<T>(2.0) * T::PI();
        for (idx, c) in uh.iter_mut().enumerate() {
            let (_, ko) = self.modes(idx);
            *c = *c * Complex::new(T::zero(), tpi * ko[axis]);
        }
        self.inverse_real(&uh)
    }

    /// Spectral Laplacian of a real periodic field.
    pub fn laplacian(&self, u: &[T]) -> Vec<T> {
        let mut uh = self.forward_real(u);
        let c4 = lit::<T>(4.0) * T::PI() * T::PI();
        for (idx, c) in uh.iter_mut().enumerate() {
            let (k, _) = self.modes(idx);
            *c = *c * (-c4 * (k[0] * k[0] + k[1] * k[1]));
        }
        self.inverse_real(&uh)
    }

    /// `curl U = d1 U2 - d2 U1`.
    pub fn curl(&self, u: &VelocityField<T>) -> Vec<T> {
        let d1u2 = self.derivative(&u.component(1), 0);
        let d2u1 = self.derivative(&u.component(0), 1);
        d1u2.iter().zip(&d2u1).map(|(a, b)| *a - *b).collect()
    }

    /// `sqrt(sum_k (1 + 4 pi^2 |k|^2)^s |u_k|^2)` from Fourier coefficients.
    pub fn sobolev_norm(&self, uh: &[Complex<T>], s: T) -> T {
        let c4 = lit::<T>(4.0) * T::PI() * T::PI();
        let mut acc = T::zero();
        for (idx, c) in uh.iter().enumerate() {
            let (k, _) = self.modes(idx);
            let w = (T::one() + c4 * (k[0] * k[0] + k[1] * k[1])).powf(s);
            acc = acc + w * c.norm_sqr();
        }
        acc.sqrt()
    }
}

/// Velocity, pressure and the measured residual of one Stokes solve.
#[derive(Clone, Debug)]
pub struct StokesSolution<T> {
    pub u: VelocityField<T>,
    pub p: Vec<T>,
    pub residual_norm: T,
}

/// Relative compatibility tolerance: `|mean j| <= MEAN_TOL_REL * ||j||_L2`.
pub const MEAN_TOL_REL: f64 = 1e-8;

/// Fourier-diagonal Stokes solver for one grid size.
#[derive(Clone, Debug)]
pub struct StokesSolver<T: Real> {
    pub spec: Spectral2d<T>,
}

impl<T: Real> StokesSolver<T> {
    pub fn new(nx: usize) -> Self {
        Self { spec: Spectral2d::new(nx) }
    }

    fn l2(values: &[Vec2<T>]) -> T {
        let n = lit::<T>(values.len() as f64);
        (values.iter().fold(T::zero(), |a, u| a + u[0] * u[0] + u[1] * u[1]) / n).sqrt()
    }

    /// Solves `-Delta U + grad p = j`; errors with [`Error::NonZeroMean`] on incompatible data.
    pub fn solve(&self, j: &VelocityField<T>) -> Result<StokesSolution<T>> {
        let tol = lit::<T>(MEAN_TOL_REL) * Self::l2(&j.values);
        let mean = j.mean();
        let mean_abs = crate::scalar::norm(mean);
        if mean_abs > tol {
            return Err(Error::NonZeroMean { mean: to_f64(mean_abs), tol: to_f64(tol) });
        }
        let (uh, ph, rh) = self.solve_modes(j);
        let s = &self.spec;
        let u1 = s.inverse_real(&uh[0]);
        let u2 = s.inverse_real(&uh[1]);
        let p = s.inverse_real(&ph);
        let residual_norm = rh.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt();
        let values = u1.into_iter().zip(u2).map(|(a, b)| [a, b]).collect();
        Ok(StokesSolution { u: VelocityField { nx: j.nx, values, t: j.t }, p, residual_norm })
    }

    /// Mode formula; returns `(U_hat, p_hat, residual_hat)`.
    fn solve_modes(&self, j: &VelocityField<T>) -> ([Vec<Complex<T>>; 2], Vec<Complex<T>>, Vec<Complex<T>>) {
        let s = &self.spec;
        let j1 = s.forward_real(&j.component(0));
        let j2 = s.forward_real(&j.component(1));
        let n2 = j1.len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut u1 = vec![zero; n2];
        let mut u2 = vec![zero; n2];
        let mut p = vec![zero; n2];
        let mut r = vec![zero; n2];
        let tpi = lit::<T>(2.0) * T::PI();
        let c4 = tpi * tpi;
        for idx in 0..n2 {
            let (k, ko) = s.modes(idx);
            let kk = k[0] * k[0] + k[1] * k[1];
            if kk == T::zero() {
                continue;
            }
            let jh = [j1[idx], j2[idx]];
            // the projection uses the odd-derivative wavenumber so that the spectral divergence
            // vanishes on Nyquist rows as well
            let kod = jh[0] * ko[0] + jh[1] * ko[1];
            let kko = ko[0] * ko[0] + ko[1] * ko[1];
            let proj = if kko > T::zero() {
                p[idx] = kod * Complex::new(T::zero(), -T::one() / (tpi * kko));
                [jh[0] - kod * (ko[0] / kko), jh[1] - kod * (ko[1] / kko)]
            } else {
                jh
            };
            u1[idx] = proj[0] / (c4 * kk);
            u2[idx] = proj[1] / (c4 * kk);
            let gp = [p[idx] * Complex::new(T::zero(), tpi * ko[0]), p[idx] * Complex::new(T::zero(), tpi * ko[1])];
            let res1 = u1[idx] * (c4 * kk) + gp[0] - jh[0];
            let res2 = u2[idx] * (c4 * kk) + gp[1] - jh[1];
            r[idx] = Complex::new((res1.norm_sqr() + res2.norm_sqr()).sqrt(), T::zero());
        }
        // the zero mode of j is rejected above, so its residual is the (tolerated) mean itself
        r[0] = Complex::new(crate::scalar::norm([j1[0].norm(), j2[0].norm()]), T::zero());
        ([u1, u2], p, r)
    }

    /// Spectral `L^2` norm of `div U`.
    pub fn divergence_norm(&self, u: &VelocityField<T>) -> T {
        let s = &self.spec;
        let a = s.derivative(&u.component(0), 0);
        let b = s.derivative(&u.component(1), 1);
        let n = lit::<T>(a.len() as f64);
        (a.iter().zip(&b).fold(T::zero(), |acc, (x, y)| acc + (*x + *y) * (*x + *y)) / n).sqrt()
    }

    /// `(||U||_H2 + ||p||_H1) / ||j||_L2` for one source.
    pub fn estimate_ratio(&self, j: &VelocityField<T>) -> Result<T> {
        let sol = self.solve(j)?;
        let s = &self.spec;
        let two = lit::<T>(2.0);
        let u_h2 = {
            let a = s.sobolev_norm(&s.forward_real(&sol.u.component(0)), two);
            let b = s.sobolev_norm(&s.forward_real(&sol.u.component(1)), two);
            (a * a + b * b).sqrt()
        };
        let p_h1 = s.sobolev_norm(&s.forward_real(&sol.p), T::one());
        let jn = Self::l2(&j.values);
        if jn == T::zero() {
            return Ok(T::zero());
        }
        Ok((u_h2 + p_h1) / jn)
    }
}

/// Solves with a freshly planned solver.
pub fn solve_stokes<T: Real>(j: &VelocityField<T>) -> Result<StokesSolution<T>> {
    StokesSolver::new(j.nx).solve(j)
}

/// Largest regularity ratio `(||U||_H2 + ||p||_H1) / ||j||_L2` over the samples.
pub fn stokes_estimate_check<T: Real>(samples: &[VelocityField<T>]) -> Result<T> {
    let mut best = T::zero();
    for j in samples {
        best = best.max(StokesSolver::new(j.nx).estimate_ratio(j)?);
    }
    Ok(best)
}
