//! Return-method controllability laboratory for the Vlasov–Stokes system on the flat torus.
//!
//! The numerical kernels ([`torus_geometry`], [`phase_fields`], [`stokes_spectral`],
//! [`characteristics`]) are generic over the [`Real`] scalar (`f32` or `f64`). The
//! construction pipeline ([`reference_trajectory`], [`control_operator`], [`harness`])
//! runs in `f64`; concrete aliases for that precision live at the crate root.

pub mod characteristics;
pub mod control_operator;
pub mod error;
pub mod harness;
pub mod phase_fields;
pub mod profiles;
pub mod reference_trajectory;
pub mod scalar;
pub mod snapshot;
pub mod stokes_spectral;
pub mod torus_geometry;

pub use error::{Error, Result};
pub use scalar::{lit, Real, Vec2};

pub type TorusPoint = torus_geometry::TorusPoint<f64>;
pub type ControlRegion = torus_geometry::ControlRegion<f64>;
pub type SphereCrossing = torus_geometry::SphereCrossing<f64>;
pub type PhaseGrid = phase_fields::PhaseGrid<f64>;
pub type DistributionField = phase_fields::DistributionField<f64>;
pub type VelocityField = phase_fields::VelocityField<f64>;
pub type MomentRecord = phase_fields::MomentRecord<f64>;
pub type StokesSolver = stokes_spectral::StokesSolver<f64>;
pub type StokesSolution = stokes_spectral::StokesSolution<f64>;
pub type Integrator = characteristics::Integrator<f64>;
pub type FlowResult = characteristics::FlowResult<f64>;
