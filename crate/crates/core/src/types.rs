//! Domain types and unit conventions shared by every other module.
//!
//! Conventions used throughout the crate:
//!
//! * All quadrature variances are normalized to shot noise, so the vacuum
//!   state has variance 1 in every quadrature.
//! * "X dB of squeezing" is a positive number meaning a linear variance of
//!   `10^(-X/10)`; antisqueezing is quoted as positive dB above shot noise.
//! * Efficiencies are power ratios in `[0, 1]`; the homodyne fringe
//!   visibility enters detection efficiency squared, since the power
//!   overlap of two modes is the square of the field overlap.
//! * The normalized pump amplitude `x` of a parametric cavity relates to
//!   its nonlinear gain by `x = 1 - 1/sqrt(G)`, i.e. `G = 1/(1-x)^2`.

use thiserror::Error;

/// Errors produced by domain-type constructors and conversions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("{name} must be in [0, 1], got {value}")]
    EfficiencyOutOfRange { name: &'static str, value: f64 },
    #[error("normalized pump must satisfy 0 <= x < 1 (below threshold), got {0}")]
    PumpOutOfRange(f64),
    #[error("nonlinear gain must be >= 1, got {0}")]
    GainBelowUnity(f64),
    #[error("phase jitter rms must satisfy 0 <= rms < pi/2 rad, got {0}")]
    JitterOutOfRange(f64),
    #[error("decibel conversion needs a positive linear value, got {0}")]
    NonPositiveLinear(f64),
    #[error("quadrature variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("quadrature pair must satisfy v_minus <= v_plus, got ({v_minus}, {v_plus})")]
    UnorderedPair { v_minus: f64, v_plus: f64 },
}

fn check_efficiency(name: &'static str, value: f64) -> Result<f64, CoreError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CoreError::EfficiencyOutOfRange { name, value })
    }
}

/// Every efficiency and loss parameter of the detection chain.
///
/// `Default` carries the reference operating point of the experiment this
/// toolkit models (bow-tie OPO/OPA cavities with a 74% quantum-efficiency
/// photodiode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyBudget {
    eta_opo: f64,
    eta_opa: f64,
    eta_mode_match: f64,
    eta_prop_other: f64,
    visibility: f64,
    eta_pd: f64,
}

impl EfficiencyBudget {
    /// Field order: OPO escape, OPA escape, OPO-to-OPA mode overlap,
    /// residual propagation, homodyne fringe visibility, photodiode QE.
    pub fn new(
        eta_opo: f64,
        eta_opa: f64,
        eta_mode_match: f64,
        eta_prop_other: f64,
        visibility: f64,
        eta_pd: f64,
    ) -> Result<Self, CoreError> {
        Ok(Self {
            eta_opo: check_efficiency("eta_opo", eta_opo)?,
            eta_opa: check_efficiency("eta_opa", eta_opa)?,
            eta_mode_match: check_efficiency("eta_mode_match", eta_mode_match)?,
            eta_prop_other: check_efficiency("eta_prop_other", eta_prop_other)?,
            visibility: check_efficiency("visibility", visibility)?,
            eta_pd: check_efficiency("eta_pd", eta_pd)?,
        })
    }

    pub fn eta_opo(&self) -> f64 {
        self.eta_opo
    }

    pub fn eta_opa(&self) -> f64 {
        self.eta_opa
    }

    pub fn eta_mode_match(&self) -> f64 {
        self.eta_mode_match
    }

    pub fn eta_prop_other(&self) -> f64 {
        self.eta_prop_other
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn eta_pd(&self) -> f64 {
        self.eta_pd
    }

    /// Efficiency of squeezing generation: everything between the OPO and
    /// the OPA input (escape, mode overlap, residual propagation).
    pub fn eta_sqz_tilde(&self) -> f64 {
        self.eta_opo * self.eta_mode_match * self.eta_prop_other
    }

    /// Total detection efficiency after the OPA: photodiode QE times the
    /// squared homodyne visibility.
    pub fn eta_det_total(&self) -> f64 {
        self.eta_pd * self.visibility * self.visibility
    }

    /// Total efficiency of the direct (OPA bypassed) measurement path.
    ///
    /// Bypassing the OPA removes the OPO-to-OPA mode-matching loss but
    /// keeps residual propagation and the detection losses.
    pub fn eta_total_direct(&self) -> f64 {
        self.eta_opo * self.eta_prop_other * self.eta_det_total()
    }
}

impl Default for EfficiencyBudget {
    fn default() -> Self {
        Self {
            eta_opo: 0.982,
            eta_opa: 0.973,
            eta_mode_match: 0.97,
            eta_prop_other: 0.99,
            visibility: 0.98,
            eta_pd: 0.74,
        }
    }
}

/// Normalized pump amplitude `x` of a below-threshold parametric cavity.
///
/// `x = sqrt(P/P_thresh)` in terms of pump power, and `x = 1 - 1/sqrt(G)`
/// in terms of the measured nonlinear gain `G`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PumpDrive {
    x: f64,
}

impl PumpDrive {
    pub fn new(x: f64) -> Result<Self, CoreError> {
        if x.is_finite() && (0.0..1.0).contains(&x) {
            Ok(Self { x })
        } else {
            Err(CoreError::PumpOutOfRange(x))
        }
    }

    /// Convert a nonlinear gain `G >= 1` to the pump amplitude `1 - 1/sqrt(G)`.
    pub fn from_gain(gain: f64) -> Result<Self, CoreError> {
        if !gain.is_finite() || gain < 1.0 {
            return Err(CoreError::GainBelowUnity(gain));
        }
        Self::new(1.0 - 1.0 / gain.sqrt())
    }

    /// Unpumped cavity (`x = 0`, unity gain).
    pub fn off() -> Self {
        Self { x: 0.0 }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// Nonlinear gain `G = 1/(1-x)^2 >= 1`.
    pub fn gain(&self) -> f64 {
        1.0 / ((1.0 - self.x) * (1.0 - self.x))
    }

    /// Pump power as a fraction of threshold, `P/P_thresh = x^2`.
    pub fn power_ratio(&self) -> f64 {
        self.x * self.x
    }
}

/// Distribution assumed for a jittering lock angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterModel {
    /// Constant offset equal to the rms value.
    FixedOffset,
    /// Equiprobable `+rms` / `-rms`; realizes the cos^2 mixing law exactly.
    TwoPoint,
    /// Zero-mean Gaussian with the given rms.
    Gaussian,
}

impl std::str::FromStr for JitterModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed-offset" => Ok(Self::FixedOffset),
            "two-point" => Ok(Self::TwoPoint),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!(
                "unknown jitter model '{other}' (expected fixed-offset, two-point, or gaussian)"
            )),
        }
    }
}

impl std::fmt::Display for JitterModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FixedOffset => "fixed-offset",
            Self::TwoPoint => "two-point",
            Self::Gaussian => "gaussian",
        })
    }
}

/// RMS phase jitter of a quadrature lock angle.
///
/// Construction caps the rms below pi/2; beyond that the variance mixing
/// law stops being meaningful as a small-jitter model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseJitter {
    rms: f64,
    model: JitterModel,
}

impl PhaseJitter {
    pub fn new(rms: f64, model: JitterModel) -> Result<Self, CoreError> {
        if rms.is_finite() && rms >= 0.0 && rms < std::f64::consts::FRAC_PI_2 {
            Ok(Self { rms, model })
        } else {
            Err(CoreError::JitterOutOfRange(rms))
        }
    }

    /// Bypasses the `rms < pi/2` cap. Intended for exercising limiting
    /// cases (e.g. a pi/2 offset swapping the quadratures) in tests.
    pub fn new_unchecked(rms: f64, model: JitterModel) -> Self {
        Self { rms, model }
    }

    /// No jitter at all.
    pub fn none() -> Self {
        Self {
            rms: 0.0,
            model: JitterModel::TwoPoint,
        }
    }

    pub fn rms(&self) -> f64 {
        self.rms
    }

    pub fn model(&self) -> JitterModel {
        self.model
    }

    /// Variance mixing weights `(cos^2 rms, sin^2 rms)`.
    pub fn mixing_weights(&self) -> (f64, f64) {
        let (s, c) = self.rms.sin_cos();
        (c * c, s * s)
    }
}

/// A squeezed/antisqueezed variance pair in shot-noise units.
///
/// By convention `v_minus` is the squeezed (smaller) quadrature variance.
/// Pairs emitted by physical chain operations additionally satisfy the
/// uncertainty bound `v_minus * v_plus >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePair {
    v_minus: f64,
    v_plus: f64,
}

impl QuadraturePair {
    pub fn new(v_minus: f64, v_plus: f64) -> Result<Self, CoreError> {
        if !(v_minus.is_finite() && v_minus > 0.0) {
            return Err(CoreError::NonPositiveVariance(v_minus));
        }
        if !(v_plus.is_finite() && v_plus > 0.0) {
            return Err(CoreError::NonPositiveVariance(v_plus));
        }
        if v_minus > v_plus {
            return Err(CoreError::UnorderedPair { v_minus, v_plus });
        }
        Ok(Self { v_minus, v_plus })
    }

    /// Vacuum: both quadratures at shot noise.
    pub fn vacuum() -> Self {
        Self {
            v_minus: 1.0,
            v_plus: 1.0,
        }
    }

    /// Crate-internal constructor for operation outputs. Positivity is
    /// still required, but ordering is not: large mixing angles (> pi/4)
    /// legitimately swap which slot holds the smaller variance.
    pub(crate) fn from_raw(v_minus: f64, v_plus: f64) -> Self {
        debug_assert!(v_minus > 0.0 && v_plus > 0.0);
        Self { v_minus, v_plus }
    }

    pub fn v_minus(&self) -> f64 {
        self.v_minus
    }

    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }

    /// Squeezed-quadrature level in dB (negative when squeezed).
    pub fn v_minus_db(&self) -> f64 {
        10.0 * self.v_minus.log10()
    }

    /// Antisqueezed-quadrature level in dB.
    pub fn v_plus_db(&self) -> f64 {
        10.0 * self.v_plus.log10()
    }
}

/// A power/variance ratio expressed in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Decibels {
    db: f64,
}

impl Decibels {
    pub fn new(db: f64) -> Self {
        Self { db }
    }

    /// `10 * log10(value)`; the linear value must be positive.
    pub fn from_linear(value: f64) -> Result<Self, CoreError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self {
                db: 10.0 * value.log10(),
            })
        } else {
            Err(CoreError::NonPositiveLinear(value))
        }
    }

    pub fn to_linear(&self) -> f64 {
        10f64.powf(self.db / 10.0)
    }

    pub fn db(&self) -> f64 {
        self.db
    }
}
