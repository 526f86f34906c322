//! Periodic potentials whose Laplacian is confined to a small ball.
//!
//! A potential is built from a zero-mass combination of radial bumps `rho` sitting inside the
//! source ball: `theta = G * rho` with `G` the mean-zero periodic Green's function, evaluated
//! spectrally (`theta_k = -rho_k / (4 pi^2 |k|^2)`) and truncated to `|k_i| <= modes`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::VelocityField;
use crate::profiles::radial_bump;
use crate::stokes_spectral::Spectral2d;
use crate::torus_geometry::{torus_delta, ControlRegion};
type Vec2 = crate::scalar::Vec2<f64>;

/// Resolution and regularisation of the high-velocity fits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSettings {
    /// Side of the grid carrying sources, reports and the `grad^perp theta` table.
    pub grid: usize,
    /// Spectral cutoff `K`: modes with `|k_1|, |k_2| <= K` are kept.
    pub modes: usize,
    /// Side of the collocation lattice used by the least-squares problem.
    pub collocation: usize,
    /// Weight of the `|Lap theta|^2` penalty outside `B(x0, r0/10)`.
    pub lap_penalty: f64,
    /// Tikhonov weight relative to the trace of the normal matrix.
    pub tikhonov: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { grid: 256, modes: 64, collocation: 64, lap_penalty: 1e-6, tikhonov: 1e-10 }
    }
}

/// Quality figures of a fitted potential.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitReport {
    /// `sup |grad theta - e| + sup |Hess theta|` outside the band (a discrete `C^1` distance).
    pub grad_target_error: f64,
    /// `sup |grad theta - e|` outside the band.
    pub grad_sup_error: f64,
    /// `sup |Lap theta|` outside the source ball, relative to `sup |grad theta|`.
    pub laplacian_leak: f64,
    /// `min |grad theta|` over grid points outside the region's ball `B(x0, r0)`.
    pub min_grad_outside: f64,
}

/// One radial bump `weight * exp(-1/(1 - (r/radius)^2))` centred at `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpSource {
    pub center: Vec2,
    pub radius: f64,
    pub weight: f64,
}

impl BumpSource {
    pub fn density(&self, x: Vec2) -> f64 {
        let d = torus_delta(x, self.center);
        self.weight * radial_bump(d[0].hypot(d[1]), self.radius)
    }
}

/// A fitted potential with its truncated spectrum and a tabulated `grad^perp theta`.
#[derive(Clone, Debug)]
pub struct HarmonicPotential {
    /// Spectral cutoff `K`.
    pub modes: usize,
    /// Coefficients `theta_k` for `|k_i| <= K`, row-major in `(k_1 + K, k_2 + K)`.
    pub fourier_coeffs: Vec<Complex64>,
    /// Ball outside of which `Lap theta` is meant to vanish.
    pub source_center: Vec2,
    pub source_radius: f64,
    pub sources: Vec<BumpSource>,
    pub fit_report: FitReport,
    /// `grad^perp theta` on the `grid x grid` lattice, evaluated bicubically.
    pub grad_perp: VelocityField,
    pub grad_sup: f64,
    pub hess_sup: f64,
    pub theta_sup: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Spectral block `(2K+1)^2` of `G * rho` for sampled sources.
fn potential_block(sources: &[BumpSource], n: usize, modes: usize) -> Vec<Complex64> {
    let sp = Spectral2d::<f64>::new(n);
    let h = 1.0 / n as f64;
    let mut rho = vec![0.0; n * n];
    for (idx, r) in rho.iter_mut().enumerate() {
        let x = [(idx / n) as f64 * h, (idx % n) as f64 * h];
        *r = sources.iter().map(|s| s.density(x)).sum();
    }
    let rh = sp.forward_real(&rho);
    let side = 2 * modes + 1;
    let mut block = vec![c(0.0, 0.0); side * side];
    let k = modes as i64;
    for a in -k..=k {
        for b in -k..=k {
            if a == 0 && b == 0 {
                continue;
            }
            let ia = a.rem_euclid(n as i64) as usize;
            let ib = b.rem_euclid(n as i64) as usize;
            let kk = (a * a + b * b) as f64;
            block[((a + k) as usize) * side + (b + k) as usize] = -rh[ia * n + ib] / (4.0 * PI * PI * kk);
        }
    }
    block
}

/// Evaluates `sum_k m(k) theta_k e^{2 pi i k.x}` on an `n x n` grid.
fn synthesize(block: &[Complex64], modes: usize, n: usize, m: impl Fn(f64, f64) -> Complex64) -> Vec<f64> {
    assert!(n > 2 * modes, "grid {n} cannot carry {modes} modes");
    let sp = Spectral2d::<f64>::new(n);
    let side = 2 * modes + 1;
    let k = modes as i64;
    let mut full = vec![c(0.0, 0.0); n * n];
    for a in -k..=k {
        for b in -k..=k {
            let v = block[((a + k) as usize) * side + (b + k) as usize];
            if v == c(0.0, 0.0) {
                continue;
            }
            let ia = a.rem_euclid(n as i64) as usize;
            let ib = b.rem_euclid(n as i64) as usize;
            full[ia * n + ib] = v * m(a as f64, b as f64);
        }
    }
    // rustfft's inverse is unnormalised, matching the u = sum_k u_k e^{2 pi i k.x} convention
    sp.inverse_real(&full)
}

fn ik(k: f64) -> Complex64 {
    c(0.0, 2.0 * PI * k)
}

/// Derivative grids `[d1, d2, d11, d12, d22, Lap]` of a potential.
struct Derivatives {
    d1: Vec<f64>,
    d2: Vec<f64>,
    d11: Vec<f64>,
    d12: Vec<f64>,
    d22: Vec<f64>,
}

impl Derivatives {
    fn new(block: &[Complex64], modes: usize, n: usize) -> Self {
        Self {
            d1: synthesize(block, modes, n, |a, _| ik(a)),
            d2: synthesize(block, modes, n, |_, b| ik(b)),
            d11: synthesize(block, modes, n, |a, _| ik(a) * ik(a)),
            d12: synthesize(block, modes, n, |a, b| ik(a) * ik(b)),
            d22: synthesize(block, modes, n, |_, b| ik(b) * ik(b)),
        }
    }

    fn lap(&self, i: usize) -> f64 {
        self.d11[i] + self.d22[i]
    }

    fn hess_norm(&self, i: usize) -> f64 {
        // Frobenius norm of the symmetric Hessian
        (self.d11[i].powi(2) + 2.0 * self.d12[i].powi(2) + self.d22[i].powi(2)).sqrt()
    }
}

impl HarmonicPotential {
    /// Potential generated by `sources` (whose total mass should vanish), sampled on an `n x n`
    /// grid and truncated at `modes`.
    pub fn from_sources(
        sources: Vec<BumpSource>,
        source_center: Vec2,
        source_radius: f64,
        n: usize,
        modes: usize,
    ) -> Self {
        let block = potential_block(&sources, n, modes);
        Self::from_block(block, sources, source_center, source_radius, n, modes)
    }

    fn from_block(
        block: Vec<Complex64>,
        sources: Vec<BumpSource>,
        source_center: Vec2,
        source_radius: f64,
        n: usize,
        modes: usize,
    ) -> Self {
        let d = Derivatives::new(&block, modes, n);
        let theta = synthesize(&block, modes, n, |_, _| c(1.0, 0.0));
        let values: Vec<Vec2> = d.d1.iter().zip(&d.d2).map(|(a, b)| [-b, *a]).collect();
        let grad_sup = values.iter().fold(0.0f64, |m, u| m.max(u[0].hypot(u[1])));
        let hess_sup = (0..n * n).fold(0.0f64, |m, i| m.max(d.hess_norm(i)));
        let theta_sup = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let leak = leak_outside(&d, n, source_center, source_radius);
        let fit_report = FitReport {
            laplacian_leak: if grad_sup > 0.0 { leak / grad_sup } else { 0.0 },
            ..FitReport::default()
        };
        Self {
            modes,
            fourier_coeffs: block,
            source_center,
            source_radius,
            sources,
            fit_report,
            grad_perp: VelocityField { nx: n, values, t: 0.0 },
            grad_sup,
            hess_sup,
            theta_sup,
        }
    }

    /// Side of the tabulation grid.
    pub fn grid(&self) -> usize {
        self.grad_perp.nx
    }

    /// `theta_k`, zero outside the stored block.
    pub fn coefficient(&self, k1: i64, k2: i64) -> Complex64 {
        let k = self.modes as i64;
        if k1.abs() > k || k2.abs() > k {
            return c(0.0, 0.0);
        }
        let side = 2 * self.modes + 1;
        self.fourier_coeffs[((k1 + k) as usize) * side + (k2 + k) as usize]
    }

    /// `grad^perp theta(x) = (-d2 theta, d1 theta)`.
    #[inline]
    pub fn eval_grad_perp(&self, x: Vec2) -> Vec2 {
        self.grad_perp.eval(x)
    }

    /// Source density `rho = Lap theta` before truncation.
    pub fn source_density(&self, x: Vec2) -> f64 {
        self.sources.iter().map(|s| s.density(x)).sum()
    }

    /// `theta` on an `n x n` grid (`n > 2 * modes`).
    pub fn theta_on(&self, n: usize) -> Vec<f64> {
        synthesize(&self.fourier_coeffs, self.modes, n, |_, _| c(1.0, 0.0))
    }

    /// Spectral `Lap theta` on an `n x n` grid.
    pub fn laplacian_on(&self, n: usize) -> Vec<f64> {
        synthesize(&self.fourier_coeffs, self.modes, n, |a, b| c(-4.0 * PI * PI * (a * a + b * b), 0.0))
    }

    /// Spectral `grad Lap theta` on an `n x n` grid.
    pub fn grad_laplacian_on(&self, n: usize) -> [Vec<f64>; 2] {
        let l = |a: f64, b: f64| -4.0 * PI * PI * (a * a + b * b);
        [
            synthesize(&self.fourier_coeffs, self.modes, n, |a, b| ik(a) * l(a, b)),
            synthesize(&self.fourier_coeffs, self.modes, n, |a, b| ik(b) * l(a, b)),
        ]
    }

    /// `grad Lap theta` sampled on the `nx x nx` lattice by subsampling the tabulation grid when
    /// possible, otherwise by direct synthesis at the finest admissible multiple of `nx`.
    pub fn grad_laplacian_sampled(&self, nx: usize) -> [Vec<f64>; 2] {
        let mut n = nx;
        while n <= 2 * self.modes {
            n *= 2;
        }
        let fine = self.grad_laplacian_on(n);
        let stride = n / nx;
        let pick = |g: &Vec<f64>| {
            let mut out = Vec::with_capacity(nx * nx);
            for i1 in 0..nx {
                for i2 in 0..nx {
                    out.push(g[(i1 * stride) * n + i2 * stride]);
                }
            }
            out
        };
        [pick(&fine[0]), pick(&fine[1])]
    }
}

fn leak_outside(d: &Derivatives, n: usize, center: Vec2, radius: f64) -> f64 {
    let h = 1.0 / n as f64;
    let mut leak = 0.0f64;
    for i in 0..n * n {
        let x = [(i / n) as f64 * h, (i % n) as f64 * h];
        let r = torus_delta(x, center);
        if r[0].hypot(r[1]) > radius {
            leak = leak.max(d.lap(i).abs());
        }
    }
    leak
}

/// Smallest `L` with `L e` an integer vector (the period of the closed geodesic along `e`).
pub fn lattice_length(e: Vec2) -> Option<f64> {
    for l2 in 1..=1_000_000u64 {
        let l = (l2 as f64).sqrt();
        let (p, q) = (e[0] * l, e[1] * l);
        if (p - p.round()).abs() < 1e-8 && (q - q.round()).abs() < 1e-8 {
            let (pi, qi) = (p.round(), q.round());
            if (pi * pi + qi * qi - l2 as f64).abs() < 0.5 {
                return Some(l);
            }
        }
    }
    None
}

/// Distance from `x` to the band `B(x0, 0) + R e` on the torus, for a rational `e` of period `l`.
pub fn band_distance(x: Vec2, x0: Vec2, e: Vec2, l: f64) -> f64 {
    let d = torus_delta(x, x0);
    let w = -d[0] * e[1] + d[1] * e[0];
    (w - (w * l).round() / l).abs()
}

/// Bump centres used by the high-velocity fits: `x0` and a hexagon at distance `r0/20`.
pub fn high_velocity_sources(region: &ControlRegion<f64>) -> Vec<BumpSource> {
    let x0 = region.x0.as_vec();
    let r = region.r0 / 20.0;
    let mut out = vec![BumpSource { center: x0, radius: r, weight: 1.0 }];
    for k in 0..6 {
        let a = k as f64 * PI / 3.0;
        out.push(BumpSource { center: [x0[0] + r * a.cos(), x0[1] + r * a.sin()], radius: r, weight: 1.0 });
    }
    out
}

/// Basis of zero-mass potentials `G * (b_k - b_0)` shared by all directions of one region.
pub struct HighVelocityBasis {
    pub region: ControlRegion<f64>,
    pub settings: FitSettings,
    sources: Vec<BumpSource>,
    blocks: Vec<Vec<Complex64>>,
    derivs: Vec<Derivatives>,
}

impl HighVelocityBasis {
    pub fn new(region: &ControlRegion<f64>, settings: FitSettings) -> Result<Self> {
        let n = settings.grid;
        if n <= 2 * settings.modes || settings.collocation == 0 || n % settings.collocation != 0 {
            return Err(Error::InvalidConfig(format!(
                "fit grid {n} must exceed twice the mode cutoff {} and be a multiple of the collocation side {}",
                settings.modes, settings.collocation
            )));
        }
        let sources = high_velocity_sources(region);
        let mut blocks = Vec::new();
        let mut derivs = Vec::new();
        for k in 1..sources.len() {
            let pair = [sources[k], BumpSource { weight: -1.0, ..sources[0] }];
            let block = potential_block(&pair, n, settings.modes);
            derivs.push(Derivatives::new(&block, settings.modes, n));
            blocks.push(block);
        }
        Ok(Self { region: *region, settings, sources, blocks, derivs })
    }

    pub fn dimension(&self) -> usize {
        self.blocks.len()
    }

    /// Least-squares fit of `grad theta ~ e` outside the band, no threshold check.
    pub fn fit(&self, e: Vec2) -> Result<HarmonicPotential> {
        let n = self.settings.grid;
        let x0 = self.region.x0.as_vec();
        let r0 = self.region.r0;
        let l = lattice_length(e)
            .ok_or_else(|| Error::InvalidConfig(format!("direction {e:?} is not rational")))?;
        let dim = self.dimension();
        let h = 1.0 / n as f64;
        let stride = n / self.settings.collocation;
        let mut normal = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i1 in (0..n).step_by(stride) {
            for i2 in (0..n).step_by(stride) {
                let idx = i1 * n + i2;
                let x = [i1 as f64 * h, i2 as f64 * h];
                if band_distance(x, x0, e, l) < r0 / 10.0 {
                    continue;
                }
                for a in 0..dim {
                    let ga = [self.derivs[a].d1[idx], self.derivs[a].d2[idx]];
                    let la = self.derivs[a].lap(idx);
                    rhs[a] += ga[0] * e[0] + ga[1] * e[1];
                    for b in 0..dim {
                        let gb = [self.derivs[b].d1[idx], self.derivs[b].d2[idx]];
                        normal[(a, b)] += ga[0] * gb[0] + ga[1] * gb[1];
                        normal[(a, b)] += self.settings.lap_penalty * la * self.derivs[b].lap(idx);
                    }
                }
            }
        }
        let reg = self.settings.tikhonov * normal.trace().max(f64::MIN_POSITIVE);
        for a in 0..dim {
            normal[(a, a)] += reg;
        }
        let coef = normal
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| normal.lu().solve(&rhs))
            .ok_or_else(|| Error::FitFailed { achieved: f64::INFINITY, target: 0.0 })?;

        let side = 2 * self.settings.modes + 1;
        let mut block = vec![c(0.0, 0.0); side * side];
        for (a, b) in self.blocks.iter().enumerate() {
            for (dst, src) in block.iter_mut().zip(b) {
                *dst += src * coef[a];
            }
        }
        let mut sources = vec![BumpSource { weight: -coef.iter().sum::<f64>(), ..self.sources[0] }];
        for (a, s) in self.sources[1..].iter().enumerate() {
            sources.push(BumpSource { weight: coef[a], ..*s });
        }
        let mut pot = HarmonicPotential::from_block(block, sources, x0, r0 / 10.0, n, self.settings.modes);

        let d = &pot_derivatives(&self.derivs, coef.as_slice());
        let mut grad_err = 0.0f64;
        let mut hess = 0.0f64;
        let mut min_grad = f64::INFINITY;
        for idx in 0..n * n {
            let x = [(idx / n) as f64 * h, (idx % n) as f64 * h];
            let g = [d.d1[idx], d.d2[idx]];
            if band_distance(x, x0, e, l) >= r0 / 10.0 {
                grad_err = grad_err.max((g[0] - e[0]).hypot(g[1] - e[1]));
                hess = hess.max(d.hess_norm(idx));
            }
            let r = torus_delta(x, x0);
            if r[0].hypot(r[1]) > r0 {
                min_grad = min_grad.min(g[0].hypot(g[1]));
            }
        }
        pot.fit_report.grad_sup_error = grad_err;
        pot.fit_report.grad_target_error = grad_err + hess;
        pot.fit_report.min_grad_outside = min_grad;
        Ok(pot)
    }
}

fn pot_derivatives(basis: &[Derivatives], coef: &[f64]) -> Derivatives {
    let len = basis[0].d1.len();
    let comb = |f: &dyn Fn(&Derivatives) -> &Vec<f64>| {
        let mut out = vec![0.0; len];
        for (b, &w) in basis.iter().zip(coef) {
            for (o, v) in out.iter_mut().zip(f(b)) {
                *o += w * v;
            }
        }
        out
    };
    Derivatives {
        d1: comb(&|d| &d.d1),
        d2: comb(&|d| &d.d2),
        d11: comb(&|d| &d.d11),
        d12: comb(&|d| &d.d12),
        d22: comb(&|d| &d.d22),
    }
}

/// Fits a potential with `grad theta ~ e` away from the band `B(x0, r0/10) + R e`.
///
/// Fails with [`Error::FitFailed`] when the achieved `grad_target_error` exceeds `eps_fit`; the
/// potential itself is available through [`HighVelocityBasis::fit`].
pub fn fit_harmonic_direction(
    e: Vec2,
    region: &ControlRegion<f64>,
    eps_fit: f64,
    settings: FitSettings,
) -> Result<HarmonicPotential> {
    let basis = HighVelocityBasis::new(region, settings)?;
    let pot = basis.fit(e)?;
    if pot.fit_report.grad_target_error > eps_fit {
        return Err(Error::FitFailed { achieved: pot.fit_report.grad_target_error, target: eps_fit });
    }
    Ok(pot)
}

/// Dipole pair `a = x0 + offset`, `b = x0 - offset` of mollified point sources.
pub fn dipole_sources(region: &ControlRegion<f64>, offset: Vec2) -> Vec<BumpSource> {
    let x0 = region.x0.as_vec();
    let radius = region.r0 / 2.0;
    vec![
        BumpSource { center: [x0[0] + offset[0], x0[1] + offset[1]], radius, weight: 1.0 },
        BumpSource { center: [x0[0] - offset[0], x0[1] - offset[1]], radius, weight: -1.0 },
    ]
}

/// Mollified dipole `G * (phi_a - phi_b)` with `a, b = x0 +- (r0/4, 0)`, synthesised on a
/// `2n x 2n` grid, together with `m = min |grad theta|` over the `n x n` lattice outside `B(x0, r0)`.
///
/// A degenerate minimum (below `1e-6`) triggers retries with rotated, shortened offsets.
pub fn fit_low_velocity_potential(region: &ControlRegion<f64>, n: usize) -> Result<(HarmonicPotential, f64)> {
    let r0 = region.r0;
    let mut last = 0.0;
    for attempt in 0..4 {
        let ang = attempt as f64 * 0.3;
        let len = r0 / 4.0 * (1.0 - 0.1 * attempt as f64);
        let offset = [len * ang.cos(), len * ang.sin()];
        let mut pot = HarmonicPotential::from_sources(
            dipole_sources(region, offset),
            region.x0.as_vec(),
            r0,
            2 * n,
            n - 1,
        );
        let m = min_grad_outside(&pot, region, n);
        pot.fit_report.min_grad_outside = m;
        if m >= 1e-6 {
            return Ok((pot, m));
        }
        last = m;
    }
    Err(Error::DegenerateFit { min_grad: last })
}

/// `min |grad theta|` over the `scan x scan` lattice outside `B(x0, r0)`; `scan` must divide
/// the tabulation grid.
pub fn min_grad_outside(pot: &HarmonicPotential, region: &ControlRegion<f64>, scan: usize) -> f64 {
    let n = pot.grid();
    assert!(n % scan == 0, "scan lattice {scan} does not divide the grid {n}");
    let stride = n / scan;
    let h = 1.0 / scan as f64;
    let x0 = region.x0.as_vec();
    let mut m = f64::INFINITY;
    for i1 in 0..scan {
        for i2 in 0..scan {
            let x = [i1 as f64 * h, i2 as f64 * h];
            let r = torus_delta(x, x0);
            if r[0].hypot(r[1]) > region.r0 {
                let g = pot.grad_perp.values[(i1 * stride) * n + i2 * stride];
                m = m.min(g[0].hypot(g[1]));
            }
        }
    }
    m
}
