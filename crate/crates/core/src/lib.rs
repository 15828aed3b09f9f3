//! Modeling, simulation, and parameter estimation for squeezed-light
//! detection chains that use a phase-sensitive amplifier in front of a
//! lossy readout.
//!
//! * [`types`] — domain types and unit conventions (efficiencies, pump
//!   drives, variance pairs, decibels).
//! * [`chain`] — closed-form noise budget: squeezing generation, phase
//!   jitter, amplified readout, effective efficiency.
//! * [`gaussian`] — independent verification engine: Gaussian-state
//!   covariance propagation and Monte-Carlo jitter averaging.
//! * [`fit`] — nonlinear least-squares estimation of loss and phase-noise
//!   parameters from measured squeezing data.
//! * [`spectra`] — zero-span noise traces and dark-noise clearance.

pub mod chain;
pub mod fit;
pub mod gaussian;
pub mod spectra;
pub mod types;

pub use chain::{
    amplified_readout, amplified_readout_sideband, amplified_shot_gain, apply_loss,
    apply_phase_jitter, cavity_response, direct_readout, effective_efficiency,
    internal_loss_pump, opo_output_variance, ChainConfig, ChainError, OpaQuadrature,
    ReadoutPrediction,
};
pub use gaussian::GaussianState;
pub use types::{
    CoreError, Decibels, EfficiencyBudget, JitterModel, PhaseJitter, PumpDrive, QuadraturePair,
};
