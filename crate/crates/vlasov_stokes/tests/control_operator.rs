use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasov_stokes::characteristics::{evaluate_transport_with, free_transport_exact, Integrator, ZeroField};
use vlasov_stokes::control_operator::{
    apply_tilde_v, apply_tilde_v_direct, cutoff, extract_control, flip_velocity, gamma3_sweep, iteration_csv, picard_fixed_point,
    picard_iterate, slice_times, time_reverse, AbsorptionModel, ControlSettings, Extension, OperatorContext, SEpsilonParams,
    TransportSettings,
};
use vlasov_stokes::phase_fields::moments;
use vlasov_stokes::torus_geometry::{ControlRegion, TorusPoint};
use vlasov_stokes::{DistributionField, Error, PhaseGrid};

fn region() -> ControlRegion<f64> {
    ControlRegion::new(TorusPoint::new(0.5, 0.5), 0.2).unwrap()
}

fn wave(x: [f64; 2], v: [f64; 2]) -> f64 {
    (1.0 + 0.5 * (2.0 * PI * x[0]).cos()) * (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp()
}

fn random_field(grid: PhaseGrid, seed: u64) -> DistributionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = DistributionField::zeros(grid, 0.0);
    f.values.iter_mut().for_each(|a| *a = rng.gen::<f64>() - 0.3);
    f
}

#[test]
fn absorption_examples() {
    assert_eq!(AbsorptionModel::absorption(-1.0, 3.0), 0.0);
    assert_eq!(AbsorptionModel::absorption(-1.0, 0.4), 1.0);
    assert_abs_diff_eq!(AbsorptionModel::absorption(-0.15, 3.0), 0.817574, epsilon = 1e-6);
    assert_abs_diff_eq!(AbsorptionModel::absorption(-0.15, 3.0), 1.0 / (1.0 + (-1.5f64).exp()), epsilon = 1e-14);
}

#[test]
fn absorption_at_a_sphere_point() {
    let m = AbsorptionModel::new(region(), 3.0);
    assert_eq!(m.a([0.3, 0.5], [3.0, 0.0]), 0.0);
    assert_eq!(m.a([0.3, 0.5], [-3.0, 0.0]), 1.0);
    assert_eq!(m.a([0.3, 0.5], [0.0, 0.0]), 1.0);
}

proptest! {
    #[test]
    fn absorption_lies_in_the_unit_interval(u in -1.0f64..1.0, s in 0.0f64..20.0) {
        let a = AbsorptionModel::absorption(u, s);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn absorption_is_one_off_the_incoming_set(u in -1.0f64..1.0, s in 0.0f64..20.0) {
        prop_assume!(u >= -0.125 || s <= 1.0);
        prop_assert_eq!(AbsorptionModel::absorption(u, s), 1.0);
    }

    #[test]
    fn absorption_is_zero_on_the_fast_incoming_set(u in -1.0f64..-0.2, s in 2.0f64..20.0) {
        prop_assert_eq!(AbsorptionModel::absorption(u, s), 0.0);
    }

    #[test]
    fn truncation_plateaus(f in 0.0f64..1.0) {
        let t_final = 3.0;
        let m = AbsorptionModel::new(region(), t_final);
        prop_assert_eq!(m.y(f * t_final / 48.0), 0.0);
        prop_assert_eq!(m.y(t_final * (47.0 + f) / 48.0), 0.0);
        prop_assert_eq!(m.y(t_final / 24.0 + f * t_final * (23.0 / 24.0 - 1.0 / 24.0)), 1.0);
        prop_assert_eq!(m.y_tilde(f * t_final / 100.0), 0.0);
        prop_assert_eq!(m.y_tilde(t_final / 48.0 + f * t_final * 47.0 / 48.0), 1.0);
        prop_assert!((0.0..=1.0).contains(&m.y(f * t_final)));
    }

    #[test]
    fn quotient_inequality(a in prop::array::uniform2(-50.0f64..50.0), b in prop::array::uniform2(-50.0f64..50.0)) {
        let n = |p: [f64; 2]| p[0].hypot(p[1]);
        let lhs = 1.0 / (1.0 + n([a[0] - b[0], a[1] - b[1]]));
        let rhs = (1.0 + n(b)) / (1.0 + n(a));
        prop_assert!(lhs <= rhs * (1.0 + 1e-14));
    }
}

#[test]
fn transparent_model_never_absorbs() {
    let m = AbsorptionModel::new(region(), 3.0).transparent();
    for t in [0.0, 0.5, 1.5, 3.0] {
        assert_eq!(m.y(t), 0.0);
    }
}

#[test]
fn holder_exponents_at_gamma_three() {
    let p = SEpsilonParams::new(3.0, 1e-3, 3.0, 1.0, 2.0).unwrap();
    assert_abs_diff_eq!(p.delta1, 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(p.delta2, 5.0 / 6.0, epsilon = 1e-15);
    assert_abs_diff_eq!(p.c1, 6f64.exp() * 32.0 * 2.0, epsilon = 1e-9);
    assert!(matches!(SEpsilonParams::new(2.0, 1e-3, 3.0, 1.0, 2.0), Err(Error::InvalidConfig(_))));
}

#[test]
fn correction_profiles_have_unit_moments() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let ext = Extension::new(grid, &region()).unwrap();
    let m2 = moments(&ext.profile(None));
    assert_abs_diff_eq!(m2.mass, 1.0, epsilon = 1e-12);
    assert!(m2.momentum[0].abs() < 1e-12 && m2.momentum[1].abs() < 1e-12);
    for a in 0..2 {
        let m1 = moments(&ext.profile(Some(a)));
        assert!(m1.mass.abs() < 1e-12);
        assert_abs_diff_eq!(m1.momentum[a], 1.0, epsilon = 1e-12);
        assert!(m1.momentum[1 - a].abs() < 1e-12);
    }
}

#[test]
fn correction_profiles_live_in_the_ball_and_the_cutoff_outside() {
    let r = region();
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let ext = Extension::new(grid, &r).unwrap();
    let mu = ext.profile(None);
    for (i, block) in mu.values.chunks(grid.velocity_len()).enumerate() {
        let x = [grid.x_node(i / grid.nx), grid.x_node(i % grid.nx)];
        let d = r.dist_to_center(x);
        if d >= r.r0 {
            assert!(block.iter().all(|a| *a == 0.0));
        }
        assert_eq!(ext.chi[i], cutoff(d, r.r0));
    }
    assert_eq!(cutoff(0.2 * 1.2, 0.2), 0.0);
    assert_eq!(cutoff(0.1, 0.2), 0.0);
    assert_eq!(cutoff(0.4, 0.2), 1.0);
    assert_eq!(cutoff(0.6, 0.2), 1.0);
}

#[test]
fn pi_fixes_mass_and_momentum() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let ext = Extension::new(grid, &region()).unwrap();
    for seed in 0..4 {
        let h = random_field(grid, seed);
        let m0 = 0.37 * seed as f64 - 0.2;
        let p = moments(&ext.apply(&h, m0, 1.0));
        assert_abs_diff_eq!(p.mass, m0, epsilon = 1e-10);
        assert!(p.momentum[0].abs() < 1e-10 && p.momentum[1].abs() < 1e-10);
    }
}

#[test]
fn pi_keeps_compliant_data() {
    let r = region();
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let ext = Extension::new(grid, &r).unwrap();
    let f = DistributionField::from_fn(grid, 0.0, |x, v| {
        if r.dist_to_center(x) > 2.0 * r.r0 {
            (-(v[0] * v[0] + v[1] * v[1]) / 2.0).exp() * (1.0 + (2.0 * PI * x[1]).sin().powi(2))
        } else {
            0.0
        }
    });
    let m = moments(&f);
    assert!(m.momentum[0].abs() < 1e-12 && m.momentum[1].abs() < 1e-12);
    let p = ext.apply(&f, m.mass, 1.0);
    let diff = p.values.iter().zip(&f.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12 * f.sup_norm(), "{diff}");
    let blended = ext.apply(&f, m.mass, 0.0);
    assert_eq!(blended.values, f.values);
}

#[test]
fn transport_starts_from_the_data() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let f0 = DistributionField::from_fn(grid, 0.0, wave);
    let model = AbsorptionModel::new(region(), 0.5);
    let times = slice_times(0.5, 4);
    let s = TransportSettings::default();
    assert_eq!(apply_tilde_v(&f0, &ZeroField, &model, &times, &s).unwrap()[0].values, f0.values);
    assert_eq!(apply_tilde_v_direct(&f0, &ZeroField, &model, &times, &s).unwrap()[0].values, f0.values);
}

#[test]
fn transparent_transport_follows_the_free_flow() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let f0 = DistributionField::from_fn(grid, 0.0, wave);
    let model = AbsorptionModel::new(region(), 0.5).transparent();
    let times = slice_times(0.5, 8);
    let s = TransportSettings::default();
    let sl = apply_tilde_v(&f0, &ZeroField, &model, &times, &s).unwrap();
    let direct = apply_tilde_v_direct(&f0, &ZeroField, &model, &times, &s).unwrap();
    let (mut e_sl, mut e_direct) = (0.0f64, 0.0f64);
    for (k, &t) in times.iter().enumerate() {
        let exact = DistributionField::from_fn(grid, t, |x, v| free_transport_exact(wave, t, x, v));
        for i in 0..exact.values.len() {
            e_sl = e_sl.max((sl[k].values[i] - exact.values[i]).abs());
            e_direct = e_direct.max((direct[k].values[i] - exact.values[i]).abs());
        }
    }
    let sup = f0.sup_norm();
    assert!(e_direct < 0.03 * sup, "direct {e_direct}");
    assert!(e_sl < 0.3 * sup, "semi-Lagrangian {e_sl}");
}

#[test]
fn head_on_particles_are_absorbed() {
    let r = region();
    let model = AbsorptionModel::new(r, 0.6);
    let start = [0.15, 0.5];
    let bump = move |x: [f64; 2], v: [f64; 2]| {
        let dx = vlasov_stokes::torus_geometry::torus_delta(x, start);
        let q = (dx[0] * dx[0] + dx[1] * dx[1]) / 0.05f64.powi(2) + ((v[0] - 3.0).powi(2) + v[1] * v[1]) / 0.1f64.powi(2);
        if q < 1.0 {
            (-1.0 / (1.0 - q)).exp()
        } else {
            0.0
        }
    };
    let t = 0.3;
    let e = (-t as f64).exp();
    let x = TorusPoint::new(start[0] + (1.0 - e) * 3.0, start[1]);
    let v = [3.0 * e, 0.0];
    let integ = Integrator::fixed(0.6, 1200);
    let free = evaluate_transport_with(bump, &ZeroField, &integ, None, t, x, v).unwrap();
    assert_abs_diff_eq!(free, (2.0 * t).exp() * bump(start, [3.0, 0.0]), epsilon = 1e-9);
    assert!(free > 0.1);
    let absorbed = evaluate_transport_with(bump, &ZeroField, &integ, Some((&r, &model)), t, x, v).unwrap();
    assert_eq!(absorbed, 0.0);
    let transparent = model.clone().transparent();
    let kept = evaluate_transport_with(bump, &ZeroField, &integ, Some((&r, &transparent)), t, x, v).unwrap();
    assert_abs_diff_eq!(kept, free, epsilon = 1e-12);
}

#[test]
fn zero_data_is_a_fixed_point() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let f0 = DistributionField::zeros(grid, 0.0);
    let model = AbsorptionModel::new(region(), 3.0);
    let params = SEpsilonParams::new(3.0, 1e-3, 3.0, 1.0, 2.0).unwrap();
    let ctx = OperatorContext::new(&f0, &ZeroField, &|_| None, &model, params, ControlSettings::default()).unwrap();
    let s = picard_fixed_point(&ctx).unwrap();
    assert!(s.converged);
    assert_eq!(s.iterations, 1);
    assert_eq!(s.delta_sup, 0.0);
    assert!(s.perturbation.iter().all(|f| f.sup_norm() == 0.0));
    assert_eq!(s.final_outside_omega, 0.0);
}

#[test]
fn small_data_converges_with_moments_preserved() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let f0 = DistributionField::from_fn(grid, 0.0, |x, v| 1e-4 * wave(x, v));
    let model = AbsorptionModel::new(region(), 0.5);
    let params = SEpsilonParams::new(3.0, 1e-3, 0.5, 1.0, 2.0).unwrap();
    let settings = ControlSettings { intervals: 8, ..ControlSettings::default() };
    let ctx = OperatorContext::new(&f0, &ZeroField, &|_| None, &model, params, settings).unwrap();
    let s = picard_iterate(&ctx).unwrap();
    assert!(s.converged, "delta {}", s.delta_sup);
    assert!(s.iterations <= 3);
    for rec in &s.history {
        assert!(rec.membership.d.pass() && rec.membership.e.pass());
    }
    let m0 = moments(&f0).mass;
    for f in &s.perturbation {
        let m = moments(f);
        assert!((m.mass - m0).abs() <= 1e-6 * m0);
        assert!(m.momentum[0].hypot(m.momentum[1]) <= 1e-8);
    }
    let csv = iteration_csv(&s.history);
    assert_eq!(csv.lines().count(), s.history.len() + 1);
}

#[test]
fn iteration_log_header() {
    assert_eq!(
        iteration_csv(&[]),
        "iter,delta_sup,membership_a,membership_b,membership_c,membership_d,membership_e,max_outside_omega\n"
    );
}

#[test]
fn reversal_maps_are_involutions() {
    let grid = PhaseGrid::new(16, 16, 6.0).unwrap();
    let f = random_field(grid, 7);
    assert_eq!(flip_velocity(&flip_velocity(&f)).values, f.values);
    let series: Vec<DistributionField> = (0..5)
        .map(|k| {
            let mut g = random_field(grid, k);
            g.t = 0.25 * k as f64;
            g
        })
        .collect();
    let back = time_reverse(&time_reverse(&series, 1.0), 1.0);
    for (a, b) in back.iter().zip(&series) {
        assert_eq!(a.values, b.values);
        assert_abs_diff_eq!(a.t, b.t, epsilon = 1e-15);
    }
    let once = time_reverse(&series, 1.0);
    assert_abs_diff_eq!(once[0].t, 0.0, epsilon = 1e-15);
    assert_eq!(once[0].values, flip_velocity(&series[4]).values);
}

fn free_residual(n: usize, vmax: f64) -> (f64, f64, f64) {
    let grid = PhaseGrid::new(n, n, vmax).unwrap();
    let times = slice_times(0.25, n / 2);
    let g: Vec<DistributionField> =
        times.iter().map(|&t| DistributionField::from_fn(grid, t, |x, v| free_transport_exact(wave, t, x, v))).collect();
    let rep = extract_control(&g, &ZeroField, &[], 1.0, &region());
    let mass = moments(&g[0]).mass;
    (rep.max_inside.max(rep.max_outside), rep.integrals.iter().copied().fold(0.0, f64::max), mass)
}

#[test]
fn free_state_residual_is_second_order() {
    let (coarse, _, _) = free_residual(16, 4.0);
    let (fine, _, _) = free_residual(32, 4.0);
    assert!(coarse / fine >= 2.5, "{coarse} -> {fine}");
}

#[test]
fn free_state_residual_has_zero_integral() {
    let (_, integral, mass) = free_residual(32, 6.0);
    assert!(integral <= 1e-6 * mass, "{integral}");
}

#[test]
fn gamma3_sweep_counts_head_on_passes() {
    let r = region();
    let integ = Integrator::fixed(3.0, 960).with_window_steps(32);
    let samples = [([0.05, 0.5], [6.0, 0.0]), ([0.1, 0.1], [0.0, 0.0]), ([0.2, 0.05], [5.0, 0.0])];
    let stats = gamma3_sweep(&ZeroField, &integ, &r, 3.0, &samples).unwrap();
    assert_eq!(stats.total, 3);
    assert_eq!(stats.passed, 1);
    assert_abs_diff_eq!(stats.fraction(), 1.0 / 3.0, epsilon = 1e-15);
}
