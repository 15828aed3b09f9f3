//! Nonlinear least-squares estimation of chain parameters from measured
//! squeezing/antisqueezing-vs-gain data.
//!
//! The measurement model is the squeezing variance pair degraded by phase
//! jitter, evaluated at the pump inferred from each record's nonlinear
//! gain. Two model variants share the same functional form:
//!
//! * `direct`   — fits the total efficiency `eta_total` of the bypassed
//!   (no amplifier) path;
//! * `amplified` — fits `eta_product = eta_sqz_tilde * eta_eff` of the
//!   amplified readout, which obeys the same variance law.
//!
//! Objectives are weighted residuals in dB by default (how zero-span
//! spectrum-analyzer data is recorded); linear-space weighting is
//! available as an option. Efficiencies are kept in `(0, 1)` by a
//! logistic transform and the jitter rms nonnegative by fitting its
//! absolute value; covariances are reported both in the transformed
//! (internal) and natural coordinates.

mod bootstrap;
mod lm;
mod model;

pub use bootstrap::{bootstrap_fit, BootstrapSummary};
pub use lm::{lm_optimize, LmOptions, LmOutcome, StopReason};
pub use model::{
    extract_effective_efficiency, fit_squeezing_model, Estimate, FitModel, FitOptions, FitResult,
    FittedParam, WeightSpace,
};

use thiserror::Error;

/// A measured squeezing/antisqueezing point at one nonlinear gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    gain_opo: f64,
    v_minus_db: f64,
    v_plus_db: f64,
    sigma_db: Option<f64>,
}

impl MeasurementRecord {
    pub fn new(
        gain_opo: f64,
        v_minus_db: f64,
        v_plus_db: f64,
        sigma_db: Option<f64>,
    ) -> Result<Self, FitError> {
        if !gain_opo.is_finite() || gain_opo < 1.0 {
            return Err(FitError::InvalidRecord(format!(
                "gain_opo must be >= 1, got {gain_opo}"
            )));
        }
        if !(v_minus_db.is_finite() && v_plus_db.is_finite()) {
            return Err(FitError::InvalidRecord(
                "variance levels must be finite".into(),
            ));
        }
        if let Some(s) = sigma_db {
            if !(s.is_finite() && s > 0.0) {
                return Err(FitError::InvalidRecord(format!(
                    "sigma_db must be positive when present, got {s}"
                )));
            }
        }
        Ok(Self {
            gain_opo,
            v_minus_db,
            v_plus_db,
            sigma_db,
        })
    }

    pub fn gain_opo(&self) -> f64 {
        self.gain_opo
    }

    pub fn v_minus_db(&self) -> f64 {
        self.v_minus_db
    }

    pub fn v_plus_db(&self) -> f64 {
        self.v_plus_db
    }

    pub fn sigma_db(&self) -> Option<f64> {
        self.sigma_db
    }
}

/// Errors from fitting and optimization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid measurement record: {0}")]
    InvalidRecord(String),
    #[error("need at least {need} records, got {got}")]
    TooFewRecords { got: usize, need: usize },
    #[error("{n_params} free parameters exceed the {n_constraints} data constraints")]
    TooManyParameters { n_params: usize, n_constraints: usize },
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("objective returned a non-finite value at parameters {params:?}")]
    NonFiniteResidual { params: Vec<f64> },
    #[error("fewer residuals ({residuals}) than parameters ({params})")]
    Underdetermined { residuals: usize, params: usize },
    #[error("Jacobian is rank-deficient; unidentifiable direction: {direction}")]
    RankDeficient { direction: String },
    #[error(
        "no convergence after {iterations} iterations (chi2 {chi2:.6e}, gradient {gradient:.3e}); \
         best-so-far parameters {params:?}"
    )]
    NoConvergence {
        iterations: usize,
        chi2: f64,
        gradient: f64,
        params: Vec<f64>,
    },
    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailed { failed: usize, total: usize },
    #[error("extraction needs an amplified-model fit with a free eta_product parameter")]
    MissingProductParameter,
    #[error("extracted efficiency {value:.4} exceeds 1 by more than 3 sigma ({sigma:.4})")]
    UnphysicalEfficiency { value: f64, sigma: f64 },
}
