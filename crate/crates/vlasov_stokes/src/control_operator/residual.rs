//! The control `G` as the discrete residual of the kinetic equation along the iterate.

use rayon::prelude::*;

use crate::characteristics::FlowField;
use crate::torus_geometry::ControlRegion;
use crate::{DistributionField, VelocityField};
type Vec2 = crate::scalar::Vec2<f64>;

/// `U(t, x)` of a windowed field at absolute time `t`.
pub fn field_value(field: &dyn FlowField<f64>, t: f64, x: Vec2) -> Vec2 {
    let mut u = field.eval(t, x);
    let w = field.windows();
    let k = w.partition_point(|win| win.start <= t);
    if k > 0 && t - w[k - 1].start < w[k - 1].width {
        let extra = field.eval_window(k - 1, t - w[k - 1].start, x);
        u = [u[0] + extra[0], u[1] + extra[1]];
    }
    u
}

/// The extracted control and where it lives.
#[derive(Clone, Debug)]
pub struct ControlReport {
    pub control: Vec<DistributionField>,
    pub max_inside: f64,
    pub max_outside: f64,
    /// `max_outside / max_inside` (infinite when the inside part vanishes but the outside does not).
    pub ratio: f64,
    /// `|int int G dx dv|` per slice.
    pub integrals: Vec<f64>,
}

/// `G = d_t g + v . grad_x g + div_v[lambda (U - v) g]` on the slices, with `g = fbar + p`.
///
/// Differences are centred in `x` and `v` (zero beyond the velocity box) and in `t`, one-sided
/// of second order at both ends.
pub fn extract_control(
    g: &[DistributionField],
    field: &dyn FlowField<f64>,
    delta_u: &[VelocityField],
    friction: f64,
    region: &ControlRegion<f64>,
) -> ControlReport {
    let n = g.len();
    assert!(n >= 3, "the residual needs at least three slices");
    let grid = g[0].grid;
    let (nx, nv) = (grid.nx, grid.nv);
    let (dx, dv) = (grid.dx(), grid.dv());
    let vs: Vec<f64> = (0..nv).map(|j| grid.v_node(j)).collect();
    let mut control = Vec::with_capacity(n);
    let mut max_inside = 0.0f64;
    let mut max_outside = 0.0f64;
    let mut integrals = Vec::with_capacity(n);
    for k in 0..n {
        let t = g[k].t;
        let dt = if k + 1 < n { g[k + 1].t - g[k].t } else { g[k].t - g[k - 1].t };
        let u = VelocityField::from_fn(nx, t, |x| {
            let a = field_value(field, t, x);
            let c = delta_u.get(k).map_or([0.0; 2], |d| d.eval(x));
            [a[0] + c[0], a[1] + c[1]]
        });
        let time_derivative = |idx: usize| -> f64 {
            if k == 0 {
                (-3.0 * g[0].values[idx] + 4.0 * g[1].values[idx] - g[2].values[idx]) / (2.0 * dt)
            } else if k + 1 == n {
                (3.0 * g[k].values[idx] - 4.0 * g[k - 1].values[idx] + g[k - 2].values[idx]) / (2.0 * dt)
            } else {
                (g[k + 1].values[idx] - g[k - 1].values[idx]) / (g[k + 1].t - g[k - 1].t)
            }
        };
        let f = &g[k];
        let mut out = DistributionField::zeros(grid, t);
        out.values.par_iter_mut().enumerate().for_each(|(idx, val)| {
            let (i1, i2, j1, j2) = grid.unindex(idx);
            let at = |a: usize, b: usize, c: isize, d: isize| -> f64 {
                if c < 0 || d < 0 || c >= nv as isize || d >= nv as isize {
                    0.0
                } else {
                    f.get(a % nx, b % nx, c as usize, d as usize)
                }
            };
            let (c, d) = (j1 as isize, j2 as isize);
            let gx1 = (at(i1 + 1, i2, c, d) - at(i1 + nx - 1, i2, c, d)) / (2.0 * dx);
            let gx2 = (at(i1, i2 + 1, c, d) - at(i1, i2 + nx - 1, c, d)) / (2.0 * dx);
            let uu = u.values[i1 * nx + i2];
            let flux1 = |jj: isize| -> f64 {
                if jj < 0 || jj >= nv as isize {
                    0.0
                } else {
                    friction * (uu[0] - vs[jj as usize]) * at(i1, i2, jj, d)
                }
            };
            let flux2 = |jj: isize| -> f64 {
                if jj < 0 || jj >= nv as isize {
                    0.0
                } else {
                    friction * (uu[1] - vs[jj as usize]) * at(i1, i2, c, jj)
                }
            };
            let div = (flux1(c + 1) - flux1(c - 1) + flux2(d + 1) - flux2(d - 1)) / (2.0 * dv);
            *val = time_derivative(idx) + vs[j1] * gx1 + vs[j2] * gx2 + div;
        });
        let vl = grid.velocity_len();
        for (i, block) in out.values.chunks(vl).enumerate() {
            let m = block.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if region.in_omega([grid.x_node(i / nx), grid.x_node(i % nx)]) {
                max_inside = max_inside.max(m);
            } else {
                max_outside = max_outside.max(m);
            }
        }
        integrals.push((out.values.iter().sum::<f64>() * grid.cell_volume()).abs());
        control.push(out);
    }
    let ratio = if max_inside > 0.0 {
        max_outside / max_inside
    } else if max_outside > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    ControlReport { control, max_inside, max_outside, ratio, integrals }
}
