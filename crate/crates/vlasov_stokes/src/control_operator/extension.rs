//! The extension operator `Pi`: cut the distribution off near the ball, then restore mass
//! and momentum with fixed profiles `mu1`, `mu2` supported in `B(x0, r0)`.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::phase_fields::moments;
use crate::profiles::{radial_bump, smoothstep};
use crate::torus_geometry::ControlRegion;
use crate::{DistributionField, PhaseGrid};

/// Precomputed cutoff and correction profiles for one grid.
#[derive(Clone, Debug)]
pub struct Extension {
    pub grid: PhaseGrid,
    /// `chi(x)`: 1 outside `B(x0, 2 r0)`, 0 inside `B(x0, 1.2 r0)`.
    pub chi: Vec<f64>,
    /// Spatial bump of unit discrete integral supported in `B(x0, r0)`.
    pub phi: Vec<f64>,
    /// Velocity parts of `mu2` and of the two components of `mu1`.
    pub mu2_v: Vec<f64>,
    pub mu1_v: [Vec<f64>; 2],
}

/// Smooth cutoff `chi` at distance `d` from the centre.
pub fn cutoff(d: f64, r0: f64) -> f64 {
    smoothstep((d - 1.2 * r0) / (0.8 * r0))
}

impl Extension {
    pub fn new(grid: PhaseGrid, region: &ControlRegion<f64>) -> Result<Self> {
        let nx = grid.nx;
        let mut chi = Vec::with_capacity(nx * nx);
        let mut phi = Vec::with_capacity(nx * nx);
        for i in 0..nx * nx {
            let x = [grid.x_node(i / nx), grid.x_node(i % nx)];
            let d = region.dist_to_center(x);
            chi.push(cutoff(d, region.r0));
            phi.push(radial_bump(d, region.r0));
        }
        let phi_mass: f64 = phi.iter().sum::<f64>() * grid.dx() * grid.dx();
        if phi_mass <= 0.0 {
            return Err(Error::InvalidConfig("the correction bump misses every grid node; refine Nx".into()));
        }
        phi.iter_mut().for_each(|p| *p /= phi_mass);

        // basis M, v1 M, v2 M with M the unit Gaussian, then exact discrete moments
        let nv = grid.nv;
        let basis: [Vec<f64>; 3] = std::array::from_fn(|b| {
            (0..nv * nv)
                .map(|j| {
                    let v = [grid.v_node(j / nv), grid.v_node(j % nv)];
                    let m = (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp();
                    if b == 0 {
                        m
                    } else {
                        v[b - 1] * m
                    }
                })
                .collect()
        });
        let dv2 = grid.dv() * grid.dv();
        let mut b = Matrix3::<f64>::zeros();
        for (col, p) in basis.iter().enumerate() {
            for (j, &val) in p.iter().enumerate() {
                let v = [grid.v_node(j / nv), grid.v_node(j % nv)];
                b[(0, col)] += val * dv2;
                b[(1, col)] += v[0] * val * dv2;
                b[(2, col)] += v[1] * val * dv2;
            }
        }
        let c = b.try_inverse().ok_or_else(|| Error::InvalidConfig("singular moment matrix for mu".into()))?;
        let combo = |col: usize| -> Vec<f64> {
            (0..nv * nv).map(|j| (0..3).map(|i| c[(i, col)] * basis[i][j]).sum()).collect()
        };
        Ok(Self { grid, chi, phi, mu2_v: combo(0), mu1_v: [combo(1), combo(2)] })
    }

    /// `mu2` (`a = None`) or component `a` of `mu1` as a distribution.
    pub fn profile(&self, a: Option<usize>) -> DistributionField {
        let q = match a {
            None => &self.mu2_v,
            Some(k) => &self.mu1_v[k],
        };
        let mut f = DistributionField::zeros(self.grid, 0.0);
        for (block, &p) in f.values.chunks_mut(self.grid.velocity_len()).zip(&self.phi) {
            for (val, &w) in block.iter_mut().zip(q) {
                *val = p * w;
            }
        }
        f
    }

    /// `pi h = chi h - (int v chi h) mu1 + (m0 - int chi h) mu2`, with `m0` the target mass.
    pub fn pi(&self, h: &DistributionField, m0: f64) -> DistributionField {
        let vl = self.grid.velocity_len();
        let mut out = h.clone();
        for (block, &c) in out.values.chunks_mut(vl).zip(&self.chi) {
            block.iter_mut().for_each(|a| *a *= c);
        }
        let m = moments(&out);
        let dm = m0 - m.mass;
        let p = m.momentum;
        for (block, &ph) in out.values.chunks_mut(vl).zip(&self.phi) {
            if ph == 0.0 {
                continue;
            }
            for (j, a) in block.iter_mut().enumerate() {
                *a += ph * (dm * self.mu2_v[j] - p[0] * self.mu1_v[0][j] - p[1] * self.mu1_v[1][j]);
            }
        }
        out
    }

    /// `Pi h = (1 - Ytilde) h + Ytilde pi h` for the blend weight `yt = Ytilde(t)`.
    pub fn apply(&self, h: &DistributionField, m0: f64, yt: f64) -> DistributionField {
        if yt == 0.0 {
            return h.clone();
        }
        let mut p = self.pi(h, m0);
        if yt < 1.0 {
            for (a, &b) in p.values.iter_mut().zip(&h.values) {
                *a = (1.0 - yt) * b + yt * *a;
            }
        }
        p.t = h.t;
        p
    }
}
