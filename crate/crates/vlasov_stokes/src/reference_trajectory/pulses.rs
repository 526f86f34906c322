//! Fields made of short pulses `amp * eta(rate * sigma) * grad^perp theta(x)`, the pulse
//! schedule of the high-velocity stage and the derived constants.

use std::sync::Arc;

use crate::characteristics::{FlowField, Window};
use crate::profiles::{eta, eta_max};
type Vec2 = crate::scalar::Vec2<f64>;

use super::harmonic::HarmonicPotential;

/// Amplitude, time scale and potential of one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub amp: f64,
    /// `1 / width`.
    pub rate: f64,
    pub potential: usize,
}

/// A velocity field that vanishes outside disjoint windows; inside window `w` at local time
/// `sigma` it equals `amp * eta(rate * sigma) * grad^perp theta_p(x)`.
#[derive(Clone, Debug, Default)]
pub struct PulseField {
    windows: Vec<Window<f64>>,
    pulses: Vec<Pulse>,
    potentials: Vec<Arc<HarmonicPotential>>,
}

impl PulseField {
    pub fn new(potentials: Vec<Arc<HarmonicPotential>>) -> Self {
        Self { windows: Vec::new(), pulses: Vec::new(), potentials }
    }

    /// Appends a window; windows must be pushed in increasing, non-overlapping order.
    pub fn push(&mut self, start: f64, width: f64, amp: f64, potential: usize) {
        assert!(potential < self.potentials.len());
        if let Some(last) = self.windows.last() {
            assert!(start >= last.start + last.width, "pulse windows must be disjoint and sorted");
        }
        self.windows.push(Window { start, width });
        self.pulses.push(Pulse { amp, rate: 1.0 / width, potential });
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn potentials(&self) -> &[Arc<HarmonicPotential>] {
        &self.potentials
    }

    pub fn potential(&self, w: usize) -> &HarmonicPotential {
        &self.potentials[self.pulses[w].potential]
    }

    /// Same field delayed by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.windows {
            w.start += dt;
        }
        out
    }

    /// Concatenation of fields whose windows follow each other in time.
    pub fn concat(parts: &[&PulseField]) -> Self {
        let mut out = PulseField::default();
        for part in parts {
            let base = out.potentials.len();
            out.potentials.extend(part.potentials.iter().cloned());
            for (w, p) in part.windows.iter().zip(&part.pulses) {
                out.push(w.start, w.width, p.amp, p.potential + base);
            }
        }
        out
    }

    /// Scalar profile `amp * eta(rate * sigma)` of window `w`.
    #[inline]
    pub fn profile(&self, w: usize, sigma: f64) -> f64 {
        let p = self.pulses[w];
        p.amp * eta(sigma * p.rate)
    }

    /// Window containing `t`, with the local time.
    pub fn active(&self, t: f64) -> Option<(usize, f64)> {
        let k = self.windows.partition_point(|w| w.start <= t);
        if k == 0 {
            return None;
        }
        let w = self.windows[k - 1];
        let sigma = t - w.start;
        (sigma < w.width).then_some((k - 1, sigma))
    }

    /// `U(t, x)` at absolute time `t`.
    pub fn value(&self, t: f64, x: Vec2) -> Vec2 {
        match self.active(t) {
            Some((w, sigma)) => self.eval_window(w, sigma, x),
            None => [0.0; 2],
        }
    }

    /// Upper bound on `sup |U|` from the pulse amplitudes and the tabulated gradients.
    pub fn sup_bound(&self) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.amp * eta_max() * self.potentials[p.potential].grad_sup)
            .fold(0.0, f64::max)
    }

    /// Earliest start and latest end of the windows.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.windows.first()?;
        let last = self.windows.last()?;
        Some((first.start, last.start + last.width))
    }
}

impl FlowField<f64> for PulseField {
    fn eval(&self, _t: f64, _x: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn windows(&self) -> &[Window<f64>] {
        &self.windows
    }

    #[inline]
    fn eval_window(&self, w: usize, sigma: f64, x: Vec2) -> Vec2 {
        let s = self.profile(w, sigma);
        if s == 0.0 {
            return [0.0; 2];
        }
        let g = self.potential(w).eval_grad_perp(x);
        [s * g[0], s * g[1]]
    }
}

/// `t_j = tau/4 + j tau / (2 (N + 1))` for a (possibly fractional) index `j`.
pub fn schedule_time(tau: f64, n: usize, j: f64) -> f64 {
    tau / 4.0 + j * tau / (2.0 * (n as f64 + 1.0))
}

/// Lower bound `e^{tau/(8(N+1))} (12(N+1)/tau + 2 + tau/(4(N+1)))` on the pulse amplitude `A`.
pub fn amplitude_lower_bound(tau: f64, n: usize) -> f64 {
    let np1 = n as f64 + 1.0;
    (tau / (8.0 * np1)).exp() * (12.0 * np1 / tau + 2.0 + tau / (4.0 * np1))
}

/// Upper limit `tau / (8(N+1))` on the pulse width `nu`.
pub fn width_limit(tau: f64, n: usize) -> f64 {
    tau / (8.0 * (n as f64 + 1.0))
}

/// Constants of the reference construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constants {
    pub t_final: f64,
    pub r0: f64,
    /// Discrete estimate of `||U1||_{C^{0,1}_{t,x}}`.
    pub lipschitz: f64,
    pub alpha: f64,
    /// Power of two `C_{r0,T}`.
    pub c_cal: f64,
    /// Speed threshold of the high-velocity sweep, safety factor included.
    pub m_lower: f64,
    /// Whether `m_lower` is backed by a fully passing sweep.
    pub m_lower_certified: bool,
    pub big_m1: f64,
    pub mbar: f64,
    /// Low-velocity amplitude `a = c b`, rate `b` and ratio `c`.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `min |grad theta|` of the low-velocity potential.
    pub m_grad: f64,
    /// High-velocity amplitude and width.
    pub big_a: f64,
    pub nu: f64,
    pub n_directions: usize,
}

impl Constants {
    /// Key-value report, one `key = value` per line.
    pub fn report(&self) -> String {
        let rows: [(&str, String); 17] = [
            ("T", format!("{:e}", self.t_final)),
            ("r0", format!("{:e}", self.r0)),
            ("N", self.n_directions.to_string()),
            ("A", format!("{:e}", self.big_a)),
            ("nu", format!("{:e}", self.nu)),
            ("U1_lipschitz", format!("{:e}", self.lipschitz)),
            ("U1_lipschitz_approximate", "true".into()),
            ("alpha", format!("{:e}", self.alpha)),
            ("C_r0_T", format!("{:e}", self.c_cal)),
            ("m_lower", format!("{:e}", self.m_lower)),
            ("m_lower_certified", self.m_lower_certified.to_string()),
            ("M1", format!("{:e}", self.big_m1)),
            ("m_grad", format!("{:e}", self.m_grad)),
            ("a", format!("{:e}", self.a)),
            ("b", format!("{:e}", self.b)),
            ("c", format!("{:e}", self.c)),
            ("Mbar", format!("{:e}", self.mbar)),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// `alpha`, `C_{r0,T}` and `M_1` from the horizon, the radius, the Lipschitz estimate `l` of
/// the high-velocity field and the sweep threshold `m_lower`.
pub fn derive_constants(t_final: f64, r0: f64, l: f64, m_lower: f64) -> Constants {
    let mut c_cal = 1.0f64;
    if l > 0.0 {
        while (1.0 + 9.0 * r0 / (c_cal * l)).ln() >= t_final / 200.0 && c_cal < 1e300 {
            c_cal *= 2.0;
        }
    }
    let alpha = (t_final * l + 2.5).max(c_cal * l / 4.0);
    let big_m1 = m_lower.max(2.0 * alpha) + t_final / 3.0 * l;
    Constants { t_final, r0, lipschitz: l, alpha, c_cal, m_lower, big_m1, ..Constants::default() }
}
