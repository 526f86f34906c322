//! Fixed-point construction of the controlled solution around the reference trajectory:
//! absorption on `S(x0, r0)`, the transport operator `Vtilde`, the extension `Pi`, the Picard
//! iteration of `V_eps`, extraction of the control and the two-phase composition.

pub mod absorption;
pub mod extension;
pub mod picard;
pub mod residual;
pub mod sweep;
pub mod transport;
pub mod two_phase;

pub use absorption::AbsorptionModel;
pub use extension::{cutoff, Extension};
pub use picard::{
    c1_norm, iteration_csv, picard_fixed_point, picard_iterate, reference_fbar, slice_times, sup_outside_omega, Check,
    ControlSettings, IterationRecord, IterationState, Membership, OperatorContext, SEpsilonParams,
};
pub use residual::{extract_control, field_value, ControlReport};
pub use sweep::{forward_samples, gamma3_sweep, Gamma3Stats};
pub use transport::{apply_tilde_v, apply_tilde_v_direct, ControlField, TransportSettings};
pub use two_phase::{flip_velocity, solve_two_phase, time_reverse, TwoPhaseResult};
