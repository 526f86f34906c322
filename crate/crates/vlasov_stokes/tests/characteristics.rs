use std::f64::consts::{E, PI};

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use vlasov_stokes::characteristics::{
    constant_field_flow, evaluate_transport_with, flow_map, free_flow, lipschitz_probe, trace, velocity_drift_check,
    ConstantField, CrossingWeight, FlowArgs, FlowField, FnField, Integrator, Window, ZeroField,
};
use vlasov_stokes::torus_geometry::{torus_delta, ControlRegion, SphereCrossing, TorusPoint};

fn pt(a: f64, b: f64) -> TorusPoint<f64> {
    TorusPoint::new(a, b)
}

fn close(a: TorusPoint<f64>, b: TorusPoint<f64>, tol: f64) -> bool {
    let d = torus_delta(a.as_vec(), b.as_vec());
    d[0].abs() < tol && d[1].abs() < tol
}

fn swirl() -> FnField<impl Fn(f64, [f64; 2]) -> [f64; 2] + Sync> {
    FnField(|t: f64, x: [f64; 2]| {
        [(2.0 * PI * x[1]).sin() * (1.0 + 0.3 * t), 0.7 * (2.0 * PI * x[0]).cos() - 0.2 * t]
    })
}

#[test]
fn equal_times_are_the_identity() {
    let integ = Integrator::fixed(1.0, 100);
    let r = flow_map(&swirl(), &integ, 0.4, 0.4, pt(0.2, 0.3), [1.0, -2.0], None).unwrap();
    assert_eq!(r.x, pt(0.2, 0.3));
    assert_eq!(r.v, [1.0, -2.0]);
    assert_eq!(r.factor, 1.0);
}

#[test]
fn zero_field_matches_closed_form() {
    let integ = Integrator::fixed(3.0, 3000);
    for (t, s) in [(3.0, 0.0), (0.0, 3.0), (1.2, 2.7)] {
        let (x, v) = ([0.31, 0.77], [2.5, -1.25]);
        let r = flow_map(&ZeroField, &integ, t, s, pt(x[0], x[1]), v, None).unwrap();
        let (xe, ve) = free_flow(t, s, x, v);
        assert!(close(r.x, xe, 1e-8), "{t} {s}");
        assert_abs_diff_eq!(r.v[0], ve[0], epsilon = 1e-8);
        assert_abs_diff_eq!(r.v[1], ve[1], epsilon = 1e-8);
    }
}

#[test]
fn constant_field_matches_closed_form() {
    let c = [1.5, -0.5];
    let integ = Integrator::fixed(3.0, 3000);
    for (t, s) in [(3.0, 0.0), (0.5, 2.0)] {
        let (x, v) = ([0.1, 0.9], [-3.0, 4.0]);
        let r = flow_map(&ConstantField(c), &integ, t, s, pt(x[0], x[1]), v, None).unwrap();
        let (xe, ve) = constant_field_flow(c, t, s, x, v);
        assert!(close(r.x, xe, 1e-8));
        assert_abs_diff_eq!(r.v[0], ve[0], epsilon = 1e-8);
        assert_abs_diff_eq!(r.v[1], ve[1], epsilon = 1e-8);
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let c = [2.0, 1.0];
    let (x, v) = ([0.0, 0.0], [5.0, -3.0]);
    let (xe, ve) = constant_field_flow(c, 2.0, 0.0, x, v);
    let errs: Vec<f64> = [10usize, 20, 40]
        .iter()
        .map(|&n| {
            let r = flow_map(&ConstantField(c), &Integrator::fixed(2.0, n), 2.0, 0.0, pt(x[0], x[1]), v, None).unwrap();
            let d = torus_delta(r.x.as_vec(), xe.as_vec());
            d[0].hypot(d[1]).max((r.v[0] - ve[0]).hypot(r.v[1] - ve[1]))
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.7 && order < 4.4, "{errs:?}");
    }
}

#[test]
fn group_and_inversion_properties() {
    let integ = Integrator::fixed(1.0, 400);
    let f = swirl();
    let (x, v) = (pt(0.42, 0.17), [1.0, 0.5]);
    let direct = flow_map(&f, &integ, 1.0, 0.0, x, v, None).unwrap();
    let mid = flow_map(&f, &integ, 0.35, 0.0, x, v, None).unwrap();
    let composed = flow_map(&f, &integ, 1.0, 0.35, mid.x, mid.v, None).unwrap();
    assert!(close(direct.x, composed.x, 1e-9));
    assert_abs_diff_eq!(direct.v[0], composed.v[0], epsilon = 1e-9);
    let back = flow_map(&f, &integ, 0.0, 1.0, direct.x, direct.v, None).unwrap();
    assert!(close(back.x, x, 1e-9));
    assert_abs_diff_eq!(back.v[1], v[1], epsilon = 1e-9);
}

#[test]
fn lipschitz_examples() {
    let integ = Integrator::fixed(1.0, 200);
    let base = FlowArgs { t: 1.0, s: 0.0, x: pt(0.3, 0.3), v: [1.0, 2.0] };
    let dx = FlowArgs { x: pt(0.31, 0.295), ..base };
    assert_eq!(lipschitz_probe(&ZeroField, &integ, &[(base, base)]).unwrap(), 0.0);
    assert!(lipschitz_probe(&ZeroField, &integ, &[(base, dx)]).unwrap() <= 1.0 + 1e-12);
    let fast = FlowArgs { v: [10.0, 0.0], ..base };
    let fast_t = FlowArgs { t: 1.001, ..fast };
    let bound = E * 2.0;
    assert!(lipschitz_probe(&ZeroField, &integ, &[(fast, fast_t)]).unwrap() <= bound);
    // refining the pair set leaves the ratio bounded for a smooth field
    let mut worst = Vec::new();
    for h in [1e-2, 1e-3, 1e-4] {
        let pairs: Vec<_> = (0..8)
            .map(|k| {
                let a = FlowArgs { t: 1.0, s: 0.1 * k as f64, x: pt(0.1 * k as f64, 0.5), v: [k as f64 - 4.0, 1.0] };
                let b = FlowArgs { t: 1.0 - h, s: a.s + h, x: pt(a.x.x1 + h, 0.5 - h), v: [a.v[0] + h, 1.0 - h] };
                (a, b)
            })
            .collect();
        worst.push(lipschitz_probe(&swirl(), &integ, &pairs).unwrap());
    }
    assert!(worst.iter().all(|&w| w < 10.0), "{worst:?}");
    assert!((worst[2] - worst[1]).abs() < 0.1 * worst[1]);
}

#[test]
fn velocity_drift_bounds() {
    let integ = Integrator::fixed(1.0, 200);
    let samples: Vec<_> = (0..10).map(|k| (1.0, pt(0.1 * k as f64, 0.3), [k as f64 - 5.0, 2.0])).collect();
    assert!(velocity_drift_check(&ZeroField, &integ, &samples).unwrap() < 1e-9);
    let unit = FnField(|_t: f64, x: [f64; 2]| [(2.0 * PI * x[1]).cos(), (2.0 * PI * x[0]).sin()]);
    let d1 = velocity_drift_check(&unit, &integ, &samples).unwrap();
    assert!(d1 <= E && d1 > 0.0);
    let double = FnField(|_t: f64, x: [f64; 2]| [2.0 * (2.0 * PI * x[1]).cos(), 2.0 * (2.0 * PI * x[0]).sin()]);
    let d2 = velocity_drift_check(&double, &integ, &samples).unwrap();
    assert!(d2 <= 2.0 * E);
}

#[test]
fn free_transport_oracle() {
    let f0 = |x: [f64; 2], v: [f64; 2]| (2.0 * PI * x[0]).cos().powi(2) * (-(v[0] * v[0] + v[1] * v[1])).exp();
    let integ = Integrator::fixed(1.0, 1000);
    let (x, v) = (pt(0.2, 0.6), [0.3, -0.4]);
    assert_eq!(evaluate_transport_with(f0, &ZeroField, &integ, None, 0.0, x, v).unwrap(), f0(x.as_vec(), v));
    let t = 0.8f64;
    let got = evaluate_transport_with(f0, &ZeroField, &integ, None, t, x, v).unwrap();
    let e = t.exp();
    let want = (2.0 * t).exp() * f0([x.x1 + (1.0 - e) * v[0], x.x2 + (1.0 - e) * v[1]], [e * v[0], e * v[1]]);
    assert_abs_diff_eq!(got, want, epsilon = 1e-9);
}

struct FullAbsorption;

impl CrossingWeight<f64> for FullAbsorption {
    fn factor(&self, c: &SphereCrossing<f64>) -> f64 {
        if c.gamma_class.in_gamma3() {
            0.0
        } else {
            1.0
        }
    }
}

#[test]
fn head_on_crossing_is_absorbed() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    let integ = Integrator::fixed(0.3, 600).guarded(0.05, vlasov_stokes::characteristics::CoarseStep::Error);
    let f0 = |_: [f64; 2], _: [f64; 2]| 1.0;
    // at t = 0.3 the point x = (0.5, 0.5) with speed 4 was outside the ball at t = 0, moving head-on into it
    let w: &dyn CrossingWeight<f64> = &FullAbsorption;
    let val = evaluate_transport_with(f0, &ConstantField([4.0, 0.0]), &integ, Some((&region, w)), 0.3, pt(0.5, 0.5), [4.0, 0.0]).unwrap();
    assert_eq!(val, 0.0);
    let coarse = Integrator::fixed(0.3, 3).guarded(0.05, vlasov_stokes::characteristics::CoarseStep::Error);
    assert!(flow_map(&ConstantField([4.0, 0.0]), &coarse, 0.0, 0.3, pt(0.5, 0.5), [4.0, 0.0], None).is_err());
}

/// A constant kick of size `a / width` during one narrow window.
struct Kick {
    w: [Window<f64>; 1],
    a: f64,
}

impl FlowField<f64> for Kick {
    fn eval(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn windows(&self) -> &[Window<f64>] {
        &self.w
    }
    fn eval_window(&self, _w: usize, _sigma: f64, _x: [f64; 2]) -> [f64; 2] {
        [self.a / self.w[0].width, 0.0]
    }
}

#[test]
fn narrow_window_delivers_its_impulse() {
    let width = 1e-15;
    let k = Kick { w: [Window { start: 0.5, width }], a: 2.0 };
    let integ = Integrator::fixed(1.0, 50);
    let r = flow_map(&k, &integ, 1.0, 0.0, pt(0.0, 0.0), [0.0, 0.0], None).unwrap();
    // V jumps by the impulse at t = 0.5 and then decays freely
    assert_abs_diff_eq!(r.v[0], 2.0 * (-0.5f64).exp(), epsilon = 1e-9);
    let back = flow_map(&k, &integ, 0.0, 1.0, r.x, r.v, None).unwrap();
    assert!(back.v[0].abs() < 1e-9 && close(back.x, pt(0.0, 0.0), 1e-9));
    // starting inside the window only the remaining part acts
    let tail = flow_map(&k, &integ, 1.0, 0.5 + width / 2.0, pt(0.0, 0.0), [0.0, 0.0], None).unwrap();
    assert!(tail.v[0] > 0.0 && tail.v[0] < 2.0 * (-0.5f64).exp());
}

#[test]
fn observer_can_stop_a_trace() {
    let integ = Integrator::fixed(1.0, 10);
    let mut n = 0;
    let tr = trace(&ZeroField, &integ, 0.0, 1.0, [0.0, 0.0], [1.0, 0.0], None, &mut |_| {
        n += 1;
        n < 3
    })
    .unwrap();
    assert_abs_diff_eq!(tr.stopped_at.unwrap(), 0.3, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn forward_backward_inverts(x in (0.0..1.0f64, 0.0..1.0f64), v in (-3.0..3.0f64, -3.0..3.0f64), t in 0.1..1.5f64) {
        let integ = Integrator::fixed(1.5, 300);
        let f = swirl();
        let a = flow_map(&f, &integ, t, 0.0, pt(x.0, x.1), [v.0, v.1], None).unwrap();
        let b = flow_map(&f, &integ, 0.0, t, a.x, a.v, None).unwrap();
        prop_assert!(close(b.x, pt(x.0, x.1), 1e-7));
        prop_assert!((b.v[0] - v.0).abs() < 1e-7 && (b.v[1] - v.1).abs() < 1e-7);
    }
}
