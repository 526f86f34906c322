//! Error type shared by every stage of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stokes source has non-zero mean {mean:e} (tolerance {tol:e})")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("integration step too coarse: displacement {displacement:e} exceeds {limit:e}")]
    StepTooCoarse { displacement: f64, limit: f64 },
    #[error("harmonic fit failed: achieved gradient error {achieved:e} above target {target:e}")]
    FitFailed { achieved: f64, target: f64 },
    #[error("degenerate potential: |grad theta| = {min_grad:e} outside the ball")]
    DegenerateFit { min_grad: f64 },
    #[error("pulse schedule infeasible: nu = {nu:e} must be below {limit:e}")]
    ScheduleInfeasible { nu: f64, limit: f64 },
    #[error("low-velocity search exceeded b_max = {b_max:e}; accelerated fraction {fraction}")]
    BudgetExceeded { b_max: f64, fraction: f64 },
    #[error("reference field does not vanish at the junction t = {t} (|U| = {value:e})")]
    GlueDiscontinuity { t: f64, value: f64 },
    #[error("fixed point did not converge after {iterations} iterations (last delta {delta:e})")]
    NoConvergence { iterations: usize, delta: f64 },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
