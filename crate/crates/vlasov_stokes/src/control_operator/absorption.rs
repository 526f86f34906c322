//! Absorption on the sphere `S(x0, r0)` and the time truncations.

use crate::characteristics::CrossingWeight;
use crate::profiles::smoothstep;
use crate::scalar::norm;
use crate::torus_geometry::{ControlRegion, SphereCrossing};
type Vec2 = crate::scalar::Vec2<f64>;

/// Absorption factor `A(x, v)` together with the truncations `Y(t)` and `Ytilde(t)`.
///
/// `A` blends smoothly from 1 (incidence `u = <v, nu>/|v| >= -1/8` or `|v| <= 1`) to 0
/// (`u <= -1/5` and `|v| >= 2`).
#[derive(Clone, Debug)]
pub struct AbsorptionModel {
    pub region: ControlRegion<f64>,
    pub t_final: f64,
    /// When false, `Y` vanishes identically and crossings are never absorbing.
    pub absorbing: bool,
}

impl AbsorptionModel {
    pub fn new(region: ControlRegion<f64>, t_final: f64) -> Self {
        Self { region, t_final, absorbing: true }
    }

    /// Same model with `Y = 0`: plain transport.
    pub fn transparent(mut self) -> Self {
        self.absorbing = false;
        self
    }

    /// `A` as a function of the incidence cosine `u` and the speed.
    pub fn absorption(u: f64, speed: f64) -> f64 {
        let su = ((-u - 0.125) / (0.2 - 0.125)).clamp(0.0, 1.0);
        let sr = (speed - 1.0).clamp(0.0, 1.0);
        1.0 - smoothstep(su) * smoothstep(sr)
    }

    /// `A(x, v)` at a point of the sphere.
    pub fn a(&self, x: Vec2, v: Vec2) -> f64 {
        let speed = norm(v);
        if speed == 0.0 {
            return 1.0;
        }
        let n = self.region.outward_normal(x);
        Self::absorption((v[0] * n[0] + v[1] * n[1]) / speed, speed)
    }

    /// `Y(t)`: 0 on `[0, T/48]` and `[47T/48, T]`, 1 on `[T/24, 23T/24]`.
    pub fn y(&self, t: f64) -> f64 {
        if !self.absorbing {
            return 0.0;
        }
        let d = self.t_final / 48.0;
        smoothstep((t - d) / d) * smoothstep((self.t_final - d - t) / d)
    }

    /// `Ytilde(t)`: 0 on `[0, T/100]`, 1 on `[T/48, T]`.
    pub fn y_tilde(&self, t: f64) -> f64 {
        let a = self.t_final / 100.0;
        let b = self.t_final / 48.0;
        smoothstep((t - a) / (b - a))
    }

    /// `1 - Y(t) (1 - A(x, v))` for one crossing; grazing crossings keep the value.
    pub fn crossing_factor(&self, c: &SphereCrossing<f64>) -> f64 {
        if c.grazing {
            return 1.0;
        }
        1.0 - self.y(c.t) * (1.0 - self.a(c.x.as_vec(), c.v))
    }
}

impl CrossingWeight<f64> for AbsorptionModel {
    fn factor(&self, c: &SphereCrossing<f64>) -> f64 {
        self.crossing_factor(c)
    }
}
