//! Oracles shared by several test binaries.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasov_stokes::phase_fields::VelocityField;
use vlasov_stokes::torus_geometry::{gcd, torus_delta};

/// Independent oracle: a coprime direction is bad when some closed geodesic of the family stays
/// at distance at least `rho` from `x0`, found by scanning offsets and minimising along each line.
pub fn oracle(x0: [f64; 2], rho: f64, r0: f64) -> Vec<(i64, i64)> {
    let cutoff = (2.0 / r0 * 1.5).ceil() as i64;
    let mut out = Vec::new();
    for p in -cutoff..=cutoff {
        for q in -cutoff..=cutoff {
            if (p, q) == (0, 0) || gcd(p, q) != 1 {
                continue;
            }
            let len = ((p * p + q * q) as f64).sqrt();
            if len > 2.0 / r0 * 1.5 {
                continue;
            }
            let e = [p as f64 / len, q as f64 / len];
            let n = [-e[1], e[0]];
            let offsets = 64;
            let mut best = 0.0f64;
            for k in 0..=offsets {
                let delta = k as f64 / (offsets as f64 * len);
                let y = [x0[0] + delta * n[0], x0[1] + delta * n[1]];
                let ds = 0.05;
                let samples = (len / ds).ceil() as usize;
                let mut m = f64::INFINITY;
                for s in 0..samples {
                    let sp = s as f64 * ds;
                    let pnt = [y[0] + sp * e[0], y[1] + sp * e[1]];
                    let d = torus_delta(pnt, x0);
                    let proj = (d[0] * e[0] + d[1] * e[1]).clamp(-ds, ds);
                    m = m.min(((d[0] - proj * e[0]).powi(2) + (d[1] - proj * e[1]).powi(2)).sqrt());
                }
                best = best.max(m);
            }
            if best >= rho - 1e-12 {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| (a.1 as f64).atan2(a.0 as f64).partial_cmp(&(b.1 as f64).atan2(b.0 as f64)).unwrap());
    out
}

pub fn noise(n: usize, seed: u64) -> VelocityField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut j = VelocityField::from_fn(n, 0.0, |_| [0.0, 0.0]);
    for v in j.values.iter_mut() {
        *v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    }
    let m = j.mean();
    for v in j.values.iter_mut() {
        v[0] -= m[0];
        v[1] -= m[1];
    }
    j
}

