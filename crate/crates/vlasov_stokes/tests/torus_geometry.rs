mod common;

use common::oracle;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use vlasov_stokes::torus_geometry::{
    bad_directions, bad_directions_for_radius, bad_lattice_directions, detect_crossings,
    torus_dist, ControlRegion, GammaClass, PathSample, TorusPoint,
};

fn pt(a: f64, b: f64) -> TorusPoint<f64> {
    TorusPoint::new(a, b)
}

#[test]
fn distance_examples() {
    assert_eq!(torus_dist(pt(0.1, 0.1), pt(0.1, 0.1)), 0.0);
    assert_abs_diff_eq!(torus_dist(pt(0.0, 0.0), pt(0.9, 0.0)), 0.1, epsilon = 1e-15);
    assert_abs_diff_eq!(torus_dist(pt(0.0, 0.0), pt(0.5, 0.5)), 2f64.sqrt() / 2.0, epsilon = 1e-15);
}

#[test]
fn distance_matches_nine_translates() {
    let a = pt(0.93, 0.07);
    let b = pt(0.02, 0.61);
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let d = ((b.x1 + i as f64 - a.x1).powi(2) + (b.x2 + j as f64 - a.x2).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    assert_abs_diff_eq!(torus_dist(a, b), best, epsilon = 1e-15);
}

#[test]
fn f32_distance_agrees() {
    let d = torus_dist(TorusPoint::<f32>::new(0.0, 0.0), TorusPoint::<f32>::new(0.9, 0.0));
    assert!((d - 0.1).abs() < 1e-6);
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in (0.0..1.0f64, 0.0..1.0f64), b in (0.0..1.0f64, 0.0..1.0f64), c in (0.0..1.0f64, 0.0..1.0f64)) {
        let (a, b, c) = (pt(a.0, a.1), pt(b.0, b.1), pt(c.0, c.1));
        prop_assert!((torus_dist(a, b) - torus_dist(b, a)).abs() < 1e-15);
        prop_assert!(torus_dist(a, c) <= torus_dist(a, b) + torus_dist(b, c) + 1e-14);
        prop_assert!(torus_dist(a, a) == 0.0);
        prop_assert!(torus_dist(a, b) <= 2f64.sqrt() / 2.0 + 1e-15);
    }

    #[test]
    fn distance_is_translation_invariant(a in (0.0..1.0f64, 0.0..1.0f64), b in (0.0..1.0f64, 0.0..1.0f64), k in (-5i32..5, -5i32..5)) {
        let moved = TorusPoint::new(a.0 + k.0 as f64, a.1 + k.1 as f64);
        prop_assert!((torus_dist(moved, pt(b.0, b.1)) - torus_dist(pt(a.0, a.1), pt(b.0, b.1))).abs() < 1e-12);
    }
}

#[test]
fn bad_directions_match_oracle_on_ladder() {
    let x0 = [0.37, 0.52];
    for r0 in [0.4, 0.2, 0.1, 0.05] {
        let got = bad_lattice_directions(r0 / 4.0);
        assert_eq!(got, oracle(x0, r0 / 4.0, r0), "r0 = {r0}");
    }
}

#[test]
fn covering_ball_has_no_bad_directions() {
    assert!(bad_directions_for_radius(0.6f64).is_empty());
}

#[test]
fn quarter_radius_005_contains_axes_and_diagonals() {
    let dirs = bad_directions_for_radius(0.05f64);
    let has = |e: [f64; 2]| dirs.iter().any(|d| (d[0] - e[0]).abs() < 1e-12 && (d[1] - e[1]).abs() < 1e-12);
    let s = 0.5f64.sqrt();
    for e in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [s, s], [-s, -s], [s, -s], [-s, s]] {
        assert!(has(e), "missing {e:?}");
    }
    assert_eq!(dirs.len() % 2, 0);
    for d in &dirs {
        assert!(has([-d[0], -d[1]]));
        assert_abs_diff_eq!(d[0].hypot(d[1]), 1.0, epsilon = 1e-15);
    }
    let angles: Vec<f64> = dirs.iter().map(|d| d[1].atan2(d[0])).collect();
    assert!(angles.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn region_uses_quarter_radius() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    assert_eq!(bad_directions(&region).len(), bad_directions_for_radius(0.05).len());
    assert!(ControlRegion::new(pt(0.5, 0.5), 0.3).is_err());
}

fn straight_path(start: [f64; 2], vel: [f64; 2], t_end: f64, n: usize) -> Vec<PathSample<f64>> {
    (0..=n)
        .map(|k| {
            let t = t_end * k as f64 / n as f64;
            PathSample { t, x: [start[0] + t * vel[0], start[1] + t * vel[1]], v: vel }
        })
        .collect()
}

#[test]
fn head_on_path_crosses_twice() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    let path = straight_path([0.1, 0.5], [3.0, 0.0], 0.25, 200);
    let c = detect_crossings(&path, &region, 1e-12).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c[0].gamma_class, GammaClass::Minus4);
    assert!(c[0].gamma_class.in_gamma3());
    assert_abs_diff_eq!(c[0].t, 0.2 / 3.0, epsilon = 1e-10);
    assert_eq!(c[1].gamma_class, GammaClass::NotIncoming);
    assert!(c[0].t < c[1].t);
}

#[test]
fn tangent_path_misses() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    let path = straight_path([0.1, 0.5 + 0.21], [3.0, 0.0], 0.25, 200);
    assert!(detect_crossings(&path, &region, 1e-12).unwrap().is_empty());
}

#[test]
fn oblique_entry_classification() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    // enter at the leftmost point of the sphere with incidence 80 degrees from the inward normal
    let ang = 80f64.to_radians();
    let vel = [3.0 * ang.cos(), 3.0 * ang.sin()];
    let hit = [0.3, 0.5];
    let t_hit = 0.05;
    let start = [hit[0] - t_hit * vel[0], hit[1] - t_hit * vel[1]];
    let path = straight_path(start, vel, 0.1, 400);
    let c = detect_crossings(&path, &region, 1e-13).unwrap();
    let first = c[0];
    assert!(first.gamma_class.in_gamma_minus());
    assert!(first.gamma_class.in_gamma2());
    assert!(!first.gamma_class.in_gamma3());
}

#[test]
fn coarse_paths_are_rejected() {
    let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
    let path = straight_path([0.1, 0.5], [3.0, 0.0], 0.25, 5);
    assert!(detect_crossings(&path, &region, 1e-12).is_err());
}

#[test]
fn classes_are_nested() {
    for (u, s, expect) in [
        (-3.0, 3.0, GammaClass::Minus4),
        (-0.65, 3.0, GammaClass::Minus3),
        (-0.45, 3.0, GammaClass::Minus2),
        (-0.31, 3.0, GammaClass::Minus),
        (-0.29, 3.0, GammaClass::NotIncoming),
        (-0.4, 0.4, GammaClass::NotIncoming),
        (-1.9, 1.9, GammaClass::Minus2),
    ] {
        assert_eq!(GammaClass::classify(u, s), expect, "u={u} s={s}");
    }
}

proptest! {
    #[test]
    fn crossings_are_isolated_and_increasing(y in 0.0..1.0f64, ang in 0.0..6.28f64, speed in 0.5..4.0f64) {
        let region = ControlRegion::new(pt(0.5, 0.5), 0.2).unwrap();
        let vel = [speed * ang.cos(), speed * ang.sin()];
        let n = (speed * 2.0 / 0.02).ceil() as usize;
        let path = straight_path([0.0, y], vel, 2.0, n);
        let c = detect_crossings(&path, &region, 1e-12).unwrap();
        prop_assert!(c.windows(2).all(|w| w[1].t - w[0].t >= 1e-12));
        for cr in &c {
            let nu = region.outward_normal(cr.x.as_vec());
            let u = cr.v[0] * nu[0] + cr.v[1] * nu[1];
            if cr.gamma_class.in_gamma_minus() {
                prop_assert!(u < 0.0);
            }
            prop_assert!((region.dist_to_center(cr.x.as_vec()) - 0.2).abs() < 1e-9);
        }
    }
}
