mod common;

use std::f64::consts::PI;

use common::noise;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use vlasov_stokes::error::Error;
use vlasov_stokes::phase_fields::VelocityField;
use vlasov_stokes::stokes_spectral::{solve_stokes, stokes_estimate_check, Spectral2d, StokesSolver};

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn zero_source_gives_zero_solution() {
    let sol = solve_stokes(&VelocityField::<f64>::zeros(32, 0.0)).unwrap();
    assert_eq!(sol.u.sup_norm(), 0.0);
    assert_eq!(sup(&sol.p), 0.0);
}

#[test]
fn shear_source_is_divided_by_four_pi_squared() {
    let j = VelocityField::from_fn(32, 0.0, |x| [(2.0 * PI * x[1]).sin(), 0.0]);
    let sol = solve_stokes(&j).unwrap();
    for (k, u) in sol.u.values.iter().enumerate() {
        assert_abs_diff_eq!(u[0], j.values[k][0] / (4.0 * PI * PI), epsilon = 1e-14);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-14);
    }
    assert!(sup(&sol.p) < 1e-14);
    assert!(sol.residual_norm < 1e-13);
}

#[test]
fn gradient_source_goes_into_pressure() {
    let j = VelocityField::from_fn(32, 0.0, |x| [-2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0]);
    let sol = solve_stokes(&j).unwrap();
    assert!(sol.u.sup_norm() < 1e-13);
    let n = 32;
    for (k, p) in sol.p.iter().enumerate() {
        let x1 = (k / n) as f64 / n as f64;
        assert_abs_diff_eq!(*p, (2.0 * PI * x1).cos(), epsilon = 1e-13);
    }
}

#[test]
fn solution_is_divergence_free_and_mean_zero() {
    let solver = StokesSolver::new(64);
    let j = noise(64, 7);
    let sol = solver.solve(&j).unwrap();
    let scale = sol.u.sup_norm();
    assert!(solver.divergence_norm(&sol.u) <= 1e-12 * scale.max(1.0));
    let m = sol.u.mean();
    assert!(m[0].abs() < 1e-15 && m[1].abs() < 1e-15);
    let l2: f64 = (j.values.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / j.values.len() as f64).sqrt();
    assert!(sol.residual_norm <= 1e-12 * l2);
}

#[test]
fn nonzero_mean_is_rejected() {
    let j = VelocityField::from_fn(16, 0.0, |x| [1.0 + (2.0 * PI * x[0]).sin(), 0.0]);
    assert!(matches!(solve_stokes(&j), Err(Error::NonZeroMean { .. })));
    let tiny = VelocityField::from_fn(16, 0.0, |x| [1e-12 + (2.0 * PI * x[0]).sin(), 0.0]);
    assert!(solve_stokes(&tiny).is_ok());
}

#[test]
fn single_mode_ratio_has_closed_form() {
    // j = (0, sin 2 pi x1): U = j / 4pi^2, p = 0; ||U||_H2 = (1 + 4pi^2)/(4pi^2) ||j||
    let j = VelocityField::from_fn(32, 0.0, |x| [0.0, (2.0 * PI * x[0]).sin()]);
    let r = StokesSolver::new(32).estimate_ratio(&j).unwrap();
    let c = 4.0 * PI * PI;
    assert_abs_diff_eq!(r, (1.0 + c) / c, epsilon = 1e-12);
    // a pure-gradient mode of unit wavenumber: p_H1 / ||j|| = sqrt(1 + c) / sqrt(c)
    let g = VelocityField::from_fn(32, 0.0, |x| [(2.0 * PI * x[0]).cos(), 0.0]);
    let r = StokesSolver::new(32).estimate_ratio(&g).unwrap();
    assert_abs_diff_eq!(r, ((1.0 + c) / c).sqrt(), epsilon = 1e-12);
}

#[test]
fn noise_ratio_is_stable_across_resolutions() {
    let r: Vec<f64> = [32usize, 64, 128].iter().map(|&n| stokes_estimate_check(&[noise(n, 11)]).unwrap()).collect();
    for w in r.windows(2) {
        assert!((w[0] - w[1]).abs() <= 0.2 * w[0], "{r:?}");
    }
    assert!(r.iter().all(|&x| x < 2.0), "{r:?}");
}

#[test]
fn ratio_is_scale_invariant() {
    let j = noise(32, 3);
    let mut j10 = j.clone();
    j10.values.iter_mut().for_each(|v| {
        v[0] *= 10.0;
        v[1] *= 10.0;
    });
    let a = stokes_estimate_check(&[j]).unwrap();
    let b = stokes_estimate_check(&[j10]).unwrap();
    assert_abs_diff_eq!(a, b, epsilon = 1e-12 * a);
}

#[test]
fn spectral_calculus_matches_analytic_derivatives() {
    let n = 32;
    let s = Spectral2d::<f64>::new(n);
    let u: Vec<f64> = (0..n * n)
        .map(|k| {
            let (x1, x2) = ((k / n) as f64 / n as f64, (k % n) as f64 / n as f64);
            (2.0 * PI * x1).sin() * (4.0 * PI * x2).cos()
        })
        .collect();
    let d1 = s.derivative(&u, 0);
    let lap = s.laplacian(&u);
    for k in 0..n * n {
        let (x1, x2) = ((k / n) as f64 / n as f64, (k % n) as f64 / n as f64);
        assert_abs_diff_eq!(d1[k], 2.0 * PI * (2.0 * PI * x1).cos() * (4.0 * PI * x2).cos(), epsilon = 1e-11);
        assert_abs_diff_eq!(lap[k], -20.0 * PI * PI * u[k], epsilon = 1e-10);
    }
    let f32s = Spectral2d::<f32>::new(16);
    let back = f32s.inverse_real(&f32s.forward_real(&[1.0f32; 256]));
    assert!(back.iter().all(|b| (b - 1.0).abs() < 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn solve_is_linear(a in -4.0..4.0f64, b in -4.0..4.0f64, s1 in 0u64..1000, s2 in 0u64..1000) {
        let solver = StokesSolver::new(16);
        let (j1, j2) = (noise(16, s1), noise(16, s2));
        let mut c = j1.clone();
        for (k, v) in c.values.iter_mut().enumerate() {
            *v = [a * j1.values[k][0] + b * j2.values[k][0], a * j1.values[k][1] + b * j2.values[k][1]];
        }
        let (u1, u2, uc) = (solver.solve(&j1).unwrap(), solver.solve(&j2).unwrap(), solver.solve(&c).unwrap());
        let scale = uc.u.sup_norm().max(a.abs() * u1.u.sup_norm() + b.abs() * u2.u.sup_norm()).max(1e-300);
        for k in 0..uc.u.values.len() {
            for d in 0..2 {
                let lin = a * u1.u.values[k][d] + b * u2.u.values[k][d];
                prop_assert!((uc.u.values[k][d] - lin).abs() <= 1e-12 * scale);
            }
        }
    }
}
