//! Smooth one-dimensional profiles: the unit-mass time bump, a `C^inf` smoothstep and a radial bump.

use std::sync::OnceLock;

fn raw_bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // composite Simpson; the integrand is flat to all orders at both ends
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * raw_bump(k as f64 * h);
        }
        acc * h / 3.0
    })
}

/// `eta(s)`: smooth, supported in `(0, 1)`, unit integral.
pub fn eta(s: f64) -> f64 {
    raw_bump(s) / bump_mass()
}

/// Derivative of [`eta`].
pub fn eta_prime(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let q = s * (1.0 - s);
    eta(s) * (1.0 - 2.0 * s) / (q * q)
}

/// Peak value `eta(1/2)`.
pub fn eta_max() -> f64 {
    eta(0.5)
}

/// Largest `|eta'|`, found on a fine sample.
pub fn eta_prime_max() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| (1..100_000).map(|k| eta_prime(k as f64 * 1e-5).abs()).fold(0.0, f64::max))
}

/// `C^inf` step: 0 for `s <= 0`, 1 for `s >= 1`, strictly monotone in between.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// Radial bump `exp(-1 / (1 - (r/R)^2))` for `r < R`, zero beyond.
pub fn radial_bump(r: f64, radius: f64) -> f64 {
    let q = r / radius;
    if q >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - q * q)).exp()
    }
}

/// `d/dr` of [`radial_bump`].
pub fn radial_bump_dr(r: f64, radius: f64) -> f64 {
    let q = r / radius;
    if q >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - q * q;
    radial_bump(r, radius) * (-2.0 * q / (d * d)) / radius
}
