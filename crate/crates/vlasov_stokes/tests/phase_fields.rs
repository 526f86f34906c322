use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use vlasov_stokes::phase_fields::{
    holder_seminorm, holder_seminorm_series, moments, weighted_sup_norm, Axis, DistributionField, PhaseGrid,
    VelocityField,
};
use vlasov_stokes::snapshot::{read_series, read_snapshot, write_moments_csv, write_series, write_snapshot};

fn grid(nx: usize, nv: usize) -> PhaseGrid<f64> {
    PhaseGrid::new(nx, nv, 6.0).unwrap()
}

#[test]
fn grid_validation() {
    assert!(PhaseGrid::<f64>::new(12, 16, 6.0).is_err());
    assert!(PhaseGrid::<f64>::new(16, 8, 6.0).is_err());
    assert!(PhaseGrid::<f64>::new(16, 16, 3.0).is_err());
    let g = grid(16, 32);
    assert_eq!(g.len(), 16 * 16 * 32 * 32);
    let idx = g.index(3, 5, 7, 11);
    assert_eq!(g.unindex(idx), (3, 5, 7, 11));
    assert_abs_diff_eq!(g.v_node(0), -g.v_node(31), epsilon = 1e-15);
}

#[test]
fn interpolation_reproduces_nodes() {
    let g = grid(16, 16);
    let f = DistributionField::from_fn(g, 0.0, |x, v| (x[0] * 7.3).sin() + x[1] * x[1] + v[0] * v[1].cos());
    for idx in [0, 17, 999, 40_000, g.len() - 1] {
        let (x, v) = g.node(idx);
        assert_eq!(f.interpolate(x, v), f.values[idx]);
    }
}

#[test]
fn interpolation_reproduces_constants_inside_the_box() {
    let g = grid(16, 16);
    let f = DistributionField::from_fn(g, 0.0, |_, _| 1.0);
    let dv = g.dv();
    let v = [g.v_node(5) + 0.37 * dv, g.v_node(9) + 0.61 * dv];
    assert_abs_diff_eq!(f.interpolate([0.123, 0.77], v), 1.0, epsilon = 1e-14);
    assert_eq!(f.interpolate([0.1, 0.1], [6.5, 0.0]), 0.0);
}

#[test]
fn interpolation_converges_at_fourth_order() {
    let mut errs = Vec::new();
    for nx in [16usize, 32, 64, 128] {
        let g = PhaseGrid::new(nx, 16, 6.0).unwrap();
        let f = DistributionField::from_fn(g, 0.0, |x, _| (2.0 * PI * x[0]).sin());
        let dx = g.dx();
        let xq = 0.25 + dx / 2.0;
        let got = f.interpolate([xq, 0.3], [g.v_node(8), g.v_node(8)]);
        errs.push((got - (2.0 * PI * xq).sin()).abs());
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 14.0 && ratio < 18.5, "ratio {ratio} errors {errs:?}");
    }
}

#[test]
fn moments_of_zero_and_radial_fields() {
    let g = grid(16, 32);
    let m = moments(&DistributionField::zeros(g, 0.0));
    assert_eq!(m.mass, 0.0);
    assert_eq!(m.momentum, [0.0, 0.0]);
    let f = DistributionField::from_fn(g, 0.0, |x, v| (1.0 + 0.5 * (2.0 * PI * x[1]).cos()) * (-(v[0] * v[0] + v[1] * v[1])).exp());
    let m = moments(&f);
    assert!(m.j.iter().all(|j| j[0].abs() < 1e-14 && j[1].abs() < 1e-14));
    assert!(m.momentum[0].abs() < 1e-15 && m.momentum[1].abs() < 1e-15);
    let sum_rho: f64 = m.rho.iter().sum::<f64>() * g.dx() * g.dx();
    assert_abs_diff_eq!(sum_rho, m.mass, epsilon = 1e-14);
    assert_abs_diff_eq!(m.mass, PI, epsilon = 1e-8);
}

#[test]
fn antidiagonal_profile_gives_current_along_x2() {
    // Z1 = -k v2 exp(-|v|^2/2) with k fixed by quadrature so that int v2 Z1 dv = 1
    let g = PhaseGrid::new(16, 64, 6.0).unwrap();
    let dv = g.dv();
    let mut s = 0.0f64;
    for j1 in 0..g.nv {
        for j2 in 0..g.nv {
            let (a, b): (f64, f64) = (g.v_node(j1), g.v_node(j2));
            s += b * b * (-(a * a + b * b) / 2.0).exp();
        }
    }
    let k = -1.0 / (s * dv * dv);
    let z1 = |v: [f64; 2]| -k * v[1] * (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp();
    let gx = |x: [f64; 2]| (2.0 * PI * x[0]).sin() + 0.5 * (2.0 * PI * x[1]).cos();
    let f = DistributionField::from_fn(g, 0.0, |x, v| z1(v) * gx(x));
    let m = moments(&f);
    for (i, j) in m.j.iter().enumerate() {
        let x = [g.x_node(i / g.nx), g.x_node(i % g.nx)];
        assert!(j[0].abs() < 1e-12);
        assert_abs_diff_eq!(j[1], gx(x), epsilon = 1e-8);
        assert!(m.rho[i].abs() < 1e-8);
    }
}

#[test]
fn weighted_norm_examples() {
    let g = grid(16, 32);
    let gamma = 3.0;
    assert_eq!(weighted_sup_norm(&DistributionField::zeros(g, 0.0), gamma), 0.0);
    let f = DistributionField::from_fn(g, 0.0, |_, v| (1.0 + v[0].hypot(v[1])).powf(-(gamma + 2.0)));
    assert_abs_diff_eq!(weighted_sup_norm(&f, gamma), 1.0, epsilon = 1e-12);
    let f = DistributionField::from_fn(g, 0.0, |_, v| (-(v[0] * v[0] + v[1] * v[1])).exp());
    let mut best = 0.0f64;
    for j1 in 0..g.nv {
        for j2 in 0..g.nv {
            let r = g.v_node(j1).hypot(g.v_node(j2));
            best = best.max((1.0 + r).powi(5) * (-r * r).exp());
        }
    }
    assert_abs_diff_eq!(weighted_sup_norm(&f, gamma), best, epsilon = 1e-12);
    // the continuous maximiser of (1 + r)^5 exp(-r^2) sits near r = 1.19
    let dense = (0..100_000).map(|k| k as f64 * 1e-4).map(|r| (1.0 + r).powi(5) * (-r * r).exp()).fold(0.0, f64::max);
    assert!(best <= dense + 1e-12 && best > 0.9 * dense);
}

proptest! {
    #[test]
    fn weighted_norm_is_homogeneous(alpha in -5.0..5.0f64) {
        let g = grid(16, 16);
        let f = DistributionField::from_fn(g, 0.0, |x, v| (x[0] - 0.3) * (-(v[0] * v[0] + 0.5 * v[1] * v[1])).exp());
        let mut h = f.clone();
        h.values.iter_mut().for_each(|a| *a *= alpha);
        let lhs = weighted_sup_norm(&h, 3.0);
        let rhs = alpha.abs() * weighted_sup_norm(&f, 3.0);
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1.0));
    }

    #[test]
    fn moments_are_linear(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = grid(16, 16);
        let f1 = DistributionField::from_fn(g, 0.0, |x, v| (2.0 * PI * x[0]).cos() * (-(v[0] - 1.0).powi(2) - v[1] * v[1]).exp());
        let f2 = DistributionField::from_fn(g, 0.0, |x, v| x[1] * (-(v[0] * v[0]) - (v[1] + 0.5).powi(2)).exp());
        let mut c = f1.clone();
        for (k, val) in c.values.iter_mut().enumerate() {
            *val = a * f1.values[k] + b * f2.values[k];
        }
        let (m1, m2, mc) = (moments(&f1), moments(&f2), moments(&c));
        prop_assert!((mc.mass - a * m1.mass - b * m2.mass).abs() < 1e-12);
        for k in 0..2 {
            prop_assert!((mc.momentum[k] - a * m1.momentum[k] - b * m2.momentum[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn holder_examples() {
    let n = 256;
    let dx = 1.0 / n as f64;
    let axes = [Axis { len: n, step: dx, periodic: false }];
    assert_eq!(holder_seminorm(&vec![2.0; n], &axes, 0.5), 0.0);
    let lin: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    assert_abs_diff_eq!(holder_seminorm(&lin, &axes, 0.5), dx.sqrt(), epsilon = 1e-12);
    let mut prev = 0.0;
    for n in [64usize, 256, 1024] {
        let dx = 1.0 / n as f64;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * dx - 0.5).abs().sqrt()).collect();
        let est = holder_seminorm(&vals, &[Axis { len: n, step: dx, periodic: false }], 0.5);
        assert!(est <= 1.0 + 1e-12 && est >= prev);
        prev = est;
    }
    assert_abs_diff_eq!(prev, 1.0, epsilon = 1e-12);
}

#[test]
fn holder_series_is_zero_for_constant_slices() {
    let g = grid(16, 16);
    let s: Vec<_> = (0..3).map(|k| DistributionField::from_fn(g, k as f64, |_, _| 0.25)).collect();
    assert_eq!(holder_seminorm_series(&s, 1.0, 0.5), 0.0);
}

#[test]
fn velocity_field_eval_and_mean() {
    let u = VelocityField::from_fn(32, 0.0, |x| [(2.0 * PI * x[1]).sin(), 0.0]);
    assert!(u.mean()[0].abs() < 1e-15);
    let e = u.eval([0.3, 0.123]);
    assert_abs_diff_eq!(e[0], (2.0 * PI * 0.123f64).sin(), epsilon = 1e-4);
}

#[test]
fn snapshot_roundtrip() {
    let g = grid(16, 16);
    let f = DistributionField::from_fn(g, 0.75, |x, v| x[0] - x[1] + v[0] * 1e-3);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &f).unwrap();
    assert_eq!(&buf[..4], b"VSF1");
    assert_eq!(buf.len(), 4 + 8 + 8 + 8 + 8 + 8 * g.len());
    let back: DistributionField<f64> = read_snapshot(&mut buf.as_slice()).unwrap();
    assert_eq!(back, f);

    let series = vec![f.clone(), DistributionField::zeros(g, 1.5)];
    let mut buf = Vec::new();
    write_series(&mut buf, &g, &series).unwrap();
    let back: Vec<DistributionField<f64>> = read_series(&mut buf.as_slice()).unwrap();
    assert_eq!(back, series);
}

#[test]
fn moments_csv_has_header_only_for_empty_input() {
    let mut buf = Vec::new();
    write_moments_csv::<_, f64>(&mut buf, &[]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t,mass,mom1,mom2,max|rho|\n");
}
