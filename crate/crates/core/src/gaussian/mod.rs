//! Brute-force verification engine: Gaussian states propagated through
//! explicit symplectic transformations, plus Monte-Carlo phase-jitter
//! averaging. Everything the closed forms in [`crate::chain`] predict can
//! be recomputed here from covariance matrices and compared.

mod jitter;
mod simulate;
mod state;

pub use jitter::{derive_stream_seed, JitterSampler};
pub use simulate::{
    randomized_equivalence_check, readout_via_state, relative_deviation, simulate_chain,
    EquivalenceReport, SimulatedReadout, WorstCase,
};
pub use state::GaussianState;
