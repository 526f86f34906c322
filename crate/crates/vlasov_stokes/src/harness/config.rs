//! Line-oriented scenario configuration.
//!
//! One `key = value` per line; `#` starts a comment; blank lines are ignored; unknown keys are
//! errors. Points are written `x0 = 0.5, 0.5`. Distribution families are written
//! `f0 = gaussian sigma=1 sigma2=0.8 mode=1,0 depth=0.5` or `f0 = zero`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_ENV: &str = "VSCTL_OUTPUT_DIR";

/// Analytic initial or target data.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Zero,
    /// `exp(-v1^2/(2 s1^2) - v2^2/(2 s2^2)) (1 + depth cos(2 pi (k . x) + phase))`.
    Gaussian { sigma1: f64, sigma2: f64, mode: [i64; 2], depth: f64, phase: f64 },
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let name = parts.next().ok_or_else(|| Error::InvalidConfig("empty family".into()))?;
        match name {
            "zero" => {
                if parts.next().is_some() {
                    return Err(Error::InvalidConfig("family `zero` takes no parameters".into()));
                }
                Ok(Family::Zero)
            }
            "gaussian" => {
                let (mut sigma1, mut sigma2, mut mode, mut depth, mut phase) = (1.0, None, [1i64, 0], 0.5, 0.0);
                for p in parts {
                    let (k, v) = p
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidConfig(format!("expected key=value in family, got `{p}`")))?;
                    match k {
                        "sigma" | "sigma1" => sigma1 = num(v)?,
                        "sigma2" => sigma2 = Some(num(v)?),
                        "depth" => depth = num(v)?,
                        "phase" => phase = num(v)?,
                        "mode" => {
                            let m: Vec<i64> = v
                                .split(',')
                                .map(|a| a.trim().parse::<i64>().map_err(|e| Error::InvalidConfig(format!("mode: {e}"))))
                                .collect::<Result<_>>()?;
                            if m.len() != 2 {
                                return Err(Error::InvalidConfig("mode needs two integers".into()));
                            }
                            mode = [m[0], m[1]];
                        }
                        _ => return Err(Error::InvalidConfig(format!("unknown gaussian parameter `{k}`"))),
                    }
                }
                let sigma2 = sigma2.unwrap_or(sigma1);
                if !(sigma1 > 0.0 && sigma2 > 0.0) || !(depth.abs() < 1.0) {
                    return Err(Error::InvalidConfig("gaussian needs sigma > 0 and |depth| < 1".into()));
                }
                Ok(Family::Gaussian { sigma1, sigma2, mode, depth, phase })
            }
            other => Err(Error::InvalidConfig(format!("unknown family `{other}`"))),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Family::Zero => "zero".into(),
            Family::Gaussian { sigma1, sigma2, mode, depth, phase } => format!(
                "gaussian sigma1={sigma1} sigma2={sigma2} mode={},{} depth={depth} phase={phase}",
                mode[0], mode[1]
            ),
        }
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::InvalidConfig(format!("`{s}`: {e}")))
}

fn int(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::InvalidConfig(format!("`{s}`: {e}")))
}

fn boolean(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::InvalidConfig(format!("`{other}` is not a boolean"))),
    }
}

/// A full scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub t_final: f64,
    pub x0: [f64; 2],
    pub r0: f64,
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub f0: Family,
    /// Target of the two-phase run; `None` runs the single phase `f0 -> 0`.
    pub f1: Option<Family>,
    pub tol: f64,
    /// Terminal tolerance outside `omega`, relative to `sup |f0|`.
    pub ctrl_tol: f64,
    pub mean_tol: f64,
    pub lap_tol: f64,
    pub eps_fit: f64,
    pub max_iter: usize,
    pub intervals: usize,
    pub window_steps: usize,
    pub escape_factor: f64,
    pub fit_modes: usize,
    pub fit_grid: usize,
    pub low_grid: usize,
    pub k3: f64,
    pub c_pi: f64,
    pub c2: f64,
    pub c3: f64,
    pub samples: usize,
    pub seed: u64,
    pub strict: bool,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            t_final: 3.0,
            x0: [0.5, 0.5],
            r0: 0.2,
            nx: 32,
            nv: 32,
            vmax: 6.0,
            gamma: 3.0,
            epsilon: 1e-3,
            lambda: 1.0,
            f0: Family::Gaussian { sigma1: 1.0, sigma2: 1.0, mode: [1, 0], depth: 0.5, phase: 0.0 },
            f1: None,
            tol: 1e-6,
            ctrl_tol: 1e-3,
            mean_tol: 1e-8,
            lap_tol: 1e-3,
            eps_fit: 1e-2,
            max_iter: 25,
            intervals: 48,
            window_steps: 8,
            escape_factor: 8.0,
            fit_modes: 64,
            fit_grid: 256,
            low_grid: 512,
            k3: 1.0,
            c_pi: 2.0,
            c2: 100.0,
            c3: 100.0,
            samples: 1000,
            seed: 1,
            strict: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    /// The desk-scale scenario `smoke`.
    pub fn smoke() -> Self {
        Self { output_dir: PathBuf::from("out/smoke"), ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            c.set(k.trim(), v.trim()).map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a file and applies the output-directory override from [`OUTPUT_ENV`].
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::parse(&std::fs::read_to_string(path)?)?;
        if let Ok(dir) = std::env::var(OUTPUT_ENV) {
            if !dir.is_empty() {
                c.output_dir = PathBuf::from(dir);
            }
        }
        Ok(c)
    }

    fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "T" => self.t_final = num(v)?,
            "x0" => {
                let p: Vec<f64> = v.split(',').map(num).collect::<Result<_>>()?;
                if p.len() != 2 {
                    return Err(Error::InvalidConfig("x0 needs two coordinates".into()));
                }
                self.x0 = [p[0], p[1]];
            }
            "r0" => self.r0 = num(v)?,
            "Nx" => self.nx = int(v)?,
            "Nv" => self.nv = int(v)?,
            "Vmax" => self.vmax = num(v)?,
            "gamma" => self.gamma = num(v)?,
            "epsilon" => self.epsilon = num(v)?,
            "lambda" => self.lambda = num(v)?,
            "f0" => self.f0 = Family::parse(v)?,
            "f1" => self.f1 = if v == "none" { None } else { Some(Family::parse(v)?) },
            "tol" => self.tol = num(v)?,
            "ctrl_tol" => self.ctrl_tol = num(v)?,
            "mean_tol" => self.mean_tol = num(v)?,
            "lap_tol" => self.lap_tol = num(v)?,
            "eps_fit" => self.eps_fit = num(v)?,
            "max_iter" => self.max_iter = int(v)?,
            "intervals" => self.intervals = int(v)?,
            "window_steps" => self.window_steps = int(v)?,
            "escape_factor" => self.escape_factor = num(v)?,
            "fit_modes" => self.fit_modes = int(v)?,
            "fit_grid" => self.fit_grid = int(v)?,
            "low_grid" => self.low_grid = int(v)?,
            "K3" => self.k3 = num(v)?,
            "C_Pi" => self.c_pi = num(v)?,
            "c2" => self.c2 = num(v)?,
            "c3" => self.c3 = num(v)?,
            "samples" => self.samples = int(v)?,
            "seed" => self.seed = v.parse().map_err(|e| Error::InvalidConfig(format!("seed: {e}")))?,
            "strict" => self.strict = boolean(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.t_final > 0.0) {
            return bad(format!("T = {} must be positive", self.t_final));
        }
        if !(self.gamma > 2.0) {
            return bad(format!("gamma = {} must exceed 2", self.gamma));
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be non-negative".into());
        }
        if self.intervals < 2 {
            return bad("intervals must be at least 2".into());
        }
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return bad("lambda must be finite and non-zero".into());
        }
        Ok(())
    }

    /// Whether the run satisfies the hypotheses of the existence theorem (`lambda = 1`).
    pub fn certified_regime(&self) -> bool {
        self.lambda == 1.0
    }

    /// Canonical text form; `parse(to_text())` returns the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("T", self.t_final.to_string());
        kv("x0", format!("{}, {}", self.x0[0], self.x0[1]));
        kv("r0", self.r0.to_string());
        kv("Nx", self.nx.to_string());
        kv("Nv", self.nv.to_string());
        kv("Vmax", self.vmax.to_string());
        kv("gamma", self.gamma.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("lambda", self.lambda.to_string());
        kv("f0", self.f0.to_text());
        kv("f1", self.f1.as_ref().map_or("none".into(), Family::to_text));
        kv("tol", self.tol.to_string());
        kv("ctrl_tol", self.ctrl_tol.to_string());
        kv("mean_tol", self.mean_tol.to_string());
        kv("lap_tol", self.lap_tol.to_string());
        kv("eps_fit", self.eps_fit.to_string());
        kv("max_iter", self.max_iter.to_string());
        kv("intervals", self.intervals.to_string());
        kv("window_steps", self.window_steps.to_string());
        kv("escape_factor", self.escape_factor.to_string());
        kv("fit_modes", self.fit_modes.to_string());
        kv("fit_grid", self.fit_grid.to_string());
        kv("low_grid", self.low_grid.to_string());
        kv("K3", self.k3.to_string());
        kv("C_Pi", self.c_pi.to_string());
        kv("c2", self.c2.to_string());
        kv("c3", self.c3.to_string());
        kv("samples", self.samples.to_string());
        kv("seed", self.seed.to_string());
        kv("strict", self.strict.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        s
    }
}
