//! Closed-form noise budget of the amplified squeezed-light readout.
//!
//! The chain is: OPO squeezer -> propagation loss `eta_sqz_tilde` -> phase
//! jitter `theta_opo` -> phase-sensitive amplifier (OPA, escape efficiency
//! `eta_opa`, pump `x_opa`) -> detection loss `eta_det = eta_pd * vis^2` ->
//! homodyne readout jittered by `theta_opa` around the OPA amplification
//! axis.
//!
//! Key formulas, all at zero sideband frequency and in shot-noise units:
//!
//! * OPO output:            `v∓ = 1 ∓ 4 x eta / (1 ± x)^2`
//! * phase jitter:          `v∓(θ) = v∓ cos²θ + v± sin²θ`
//! * amplified shot noise:  `A = 1 + 4 x_opa eta_opa eta_det / (1 - x_opa)^2`
//! * effective efficiency:  `eta_eff = eta_det (2 eta_opa + x_opa - 1)^2 /
//!                           ((1 - x_opa)^2 + 4 x_opa eta_det eta_opa)`
//! * loss-compensation pump: `x_int = (1 - eta_opa) / (1 - eta_det)`
//!
//! The amplified readout is reported normalized to the amplified shot
//! noise, which collapses the whole post-OPO chain into the single
//! effective efficiency above.

use thiserror::Error;

use crate::types::{EfficiencyBudget, PhaseJitter, PumpDrive, QuadraturePair};

/// Errors for closed-form operations whose inputs leave the model's domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(
        "OPA escape efficiency {0} is out of model range (< 0.5); the effective-efficiency \
         formula develops non-monotone artifacts there"
    )]
    OpaEscapeOutOfModel(f64),
    #[error("detection is lossless (eta_det = 1); there is no loss to compensate")]
    NoDetectionLoss,
    #[error(
        "OPA internal loss exceeds the compensable range: required pump x_int = {0} is not \
         below threshold"
    )]
    UncompensableLoss(f64),
}

/// Which OPA quadrature the homodyne readout is locked to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OpaQuadrature {
    /// Readout aligned with the amplified axis; the squeezed quadrature of
    /// the input is amplified above the detection noise. This is the
    /// loss-tolerant operating point.
    #[default]
    Amplify,
    /// Readout aligned with the deamplified axis. Provided for
    /// completeness; not an operating point of the modeled experiment.
    Deamplify,
}

/// Complete parameter set for one amplified-readout prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub budget: EfficiencyBudget,
    pub x_opo: PumpDrive,
    pub x_opa: PumpDrive,
    pub theta_opo: PhaseJitter,
    pub theta_opa: PhaseJitter,
    pub opa_quadrature: OpaQuadrature,
}

impl ChainConfig {
    pub fn new(
        budget: EfficiencyBudget,
        x_opo: PumpDrive,
        x_opa: PumpDrive,
        theta_opo: PhaseJitter,
        theta_opa: PhaseJitter,
    ) -> Self {
        Self {
            budget,
            x_opo,
            x_opa,
            theta_opo,
            theta_opa,
            opa_quadrature: OpaQuadrature::Amplify,
        }
    }
}

/// Amplified-readout prediction, normalized to the amplified shot noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutPrediction {
    /// Effective variance measured in the squeezing configuration.
    pub v_eff_minus: f64,
    /// Effective variance measured in the antisqueezing configuration.
    pub v_eff_plus: f64,
    /// Amplified shot noise relative to unamplified shot noise (linear).
    pub amplified_shot_gain: f64,
    /// Effective efficiency of the amplified readout.
    pub eta_eff: f64,
}

/// Squeezing/antisqueezing variance at the output of a parametric cavity
/// followed by a total efficiency `eta_tot`:
/// `v∓ = 1 ∓ 4 x eta_tot / (1 ± x)^2`.
pub fn opo_output_variance(x: PumpDrive, eta_tot: f64) -> QuadraturePair {
    debug_assert!((0.0..=1.0).contains(&eta_tot));
    let x = x.x();
    let num = 4.0 * x * eta_tot;
    let v_minus = 1.0 - num / ((1.0 + x) * (1.0 + x));
    let v_plus = 1.0 + num / ((1.0 - x) * (1.0 - x));
    QuadraturePair::from_raw(v_minus, v_plus)
}

/// Lorentzian cavity generalization of [`opo_output_variance`] at sideband
/// frequency `omega` (normalized to the cavity half-linewidth):
/// `v∓(Ω) = 1 ∓ 4 x eta / ((1 ± x)^2 + Ω^2)`. Reduces to the zero-frequency
/// form at `omega = 0` and approaches vacuum far outside the linewidth.
pub fn cavity_response(x: PumpDrive, eta: f64, omega: f64) -> QuadraturePair {
    debug_assert!((0.0..=1.0).contains(&eta));
    debug_assert!(omega >= 0.0);
    let x = x.x();
    let num = 4.0 * x * eta;
    let om2 = omega * omega;
    let v_minus = 1.0 - num / ((1.0 + x) * (1.0 + x) + om2);
    let v_plus = 1.0 + num / ((1.0 - x) * (1.0 - x) + om2);
    QuadraturePair::from_raw(v_minus, v_plus)
}

/// Mix a variance pair by a jittering quadrature angle:
/// `v∓(θ) = v∓ cos²θ + v± sin²θ` with `θ` the rms of the jitter.
///
/// Preserves `v_minus + v_plus` and is an involution at `θ = pi/2` (the
/// returned slots are swapped there; only jitter below `pi/4` keeps the
/// squeezed slot the smaller one).
pub fn apply_phase_jitter(pair: QuadraturePair, theta: &PhaseJitter) -> QuadraturePair {
    let (c2, s2) = theta.mixing_weights();
    QuadraturePair::from_raw(
        pair.v_minus() * c2 + pair.v_plus() * s2,
        pair.v_plus() * c2 + pair.v_minus() * s2,
    )
}

/// Beamsplitter loss on both quadratures: `v' = eta v + (1 - eta)`.
pub fn apply_loss(pair: QuadraturePair, eta: f64) -> QuadraturePair {
    debug_assert!((0.0..=1.0).contains(&eta));
    QuadraturePair::from_raw(
        eta * pair.v_minus() + (1.0 - eta),
        eta * pair.v_plus() + (1.0 - eta),
    )
}

/// Effective detection efficiency of the amplified readout.
///
/// Valid for `eta_opa >= 1/2`; below that the formula is rejected as out
/// of model.
pub fn effective_efficiency(
    x_opa: PumpDrive,
    eta_opa: f64,
    eta_det: f64,
) -> Result<f64, ChainError> {
    debug_assert!((0.0..=1.0).contains(&eta_det));
    if !(0.5..=1.0).contains(&eta_opa) {
        return Err(ChainError::OpaEscapeOutOfModel(eta_opa));
    }
    let x = x_opa.x();
    let num = eta_det * (2.0 * eta_opa + x - 1.0) * (2.0 * eta_opa + x - 1.0);
    let den = (1.0 - x) * (1.0 - x) + 4.0 * x * eta_det * eta_opa;
    Ok(num / den)
}

/// Minimum pump required for the OPA to compensate its own internal loss,
/// `x_int = (1 - eta_opa)/(1 - eta_det)`. At this pump the effective
/// efficiency equals the bare detection efficiency exactly.
pub fn internal_loss_pump(eta_opa: f64, eta_det: f64) -> Result<PumpDrive, ChainError> {
    debug_assert!((0.0..=1.0).contains(&eta_opa));
    debug_assert!((0.0..=1.0).contains(&eta_det));
    if eta_det >= 1.0 {
        return Err(ChainError::NoDetectionLoss);
    }
    let x_int = (1.0 - eta_opa) / (1.0 - eta_det);
    PumpDrive::new(x_int).map_err(|_| ChainError::UncompensableLoss(x_int))
}

/// Amplified shot noise relative to the unamplified shot noise:
/// `A = 1 + 4 x_opa eta_opa eta_det / (1 - x_opa)^2 >= 1`.
pub fn amplified_shot_gain(x_opa: PumpDrive, eta_opa: f64, eta_det: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&eta_opa));
    debug_assert!((0.0..=1.0).contains(&eta_det));
    let x = x_opa.x();
    1.0 + 4.0 * x * eta_opa * eta_det / ((1.0 - x) * (1.0 - x))
}

/// Direct (OPA bypassed) readout: OPO squeezing through the direct-path
/// efficiency, degraded by the squeezing phase jitter.
pub fn direct_readout(
    budget: &EfficiencyBudget,
    x_opo: PumpDrive,
    theta: &PhaseJitter,
) -> QuadraturePair {
    apply_phase_jitter(opo_output_variance(x_opo, budget.eta_total_direct()), theta)
}

/// Power transmissions of the OPA viewed as a two-port cavity at zero
/// sideband frequency. Returns `(t_amp^2, c_amp^2, t_deamp^2, c_deamp^2)`:
/// signal and vacuum-ancilla power couplings of the amplified and
/// deamplified quadratures. The signal amplitudes are
/// `(2 eta - 1 ± x)/(1 ∓ x)`, so an unpumped lossy cavity reflects with
/// amplitude `2 eta - 1`.
fn opa_transmissions(x_opa: PumpDrive, eta_opa: f64) -> (f64, f64, f64, f64) {
    let x = x_opa.x();
    let vac = 4.0 * eta_opa * (1.0 - eta_opa);
    let t_amp = (2.0 * eta_opa - 1.0 + x) / (1.0 - x);
    let t_deamp = (2.0 * eta_opa - 1.0 - x) / (1.0 + x);
    (
        t_amp * t_amp,
        vac / ((1.0 - x) * (1.0 - x)),
        t_deamp * t_deamp,
        vac / ((1.0 + x) * (1.0 + x)),
    )
}

/// Detected OPA-frame variances before normalization.
///
/// `meas` is the OPA channel the homodyne is locked to, `orth` the
/// orthogonal channel; `_sqz`/`_anti` label the OPO alignment
/// (squeezed/antisqueezed quadrature feeding the measured channel), and
/// `shot_*` are the same channels with vacuum at the OPA input.
struct DetectedFrame {
    meas_sqz: f64,
    orth_sqz: f64,
    meas_anti: f64,
    orth_anti: f64,
    shot_meas: f64,
    shot_orth: f64,
}

fn detected_frame(cfg: &ChainConfig, input: QuadraturePair, eta_det: f64) -> DetectedFrame {
    let (t_amp2, c_amp2, t_de2, c_de2) = opa_transmissions(cfg.x_opa, cfg.budget.eta_opa());
    let (tm2, cm2, to2, co2) = match cfg.opa_quadrature {
        OpaQuadrature::Amplify => (t_amp2, c_amp2, t_de2, c_de2),
        OpaQuadrature::Deamplify => (t_de2, c_de2, t_amp2, c_amp2),
    };
    let m = apply_phase_jitter(input, &cfg.theta_opo);
    let detect = |v: f64| eta_det * v + (1.0 - eta_det);
    DetectedFrame {
        meas_sqz: detect(tm2 * m.v_minus() + cm2),
        orth_sqz: detect(to2 * m.v_plus() + co2),
        meas_anti: detect(tm2 * m.v_plus() + cm2),
        orth_anti: detect(to2 * m.v_minus() + co2),
        shot_meas: detect(tm2 + cm2),
        shot_orth: detect(to2 + co2),
    }
}

/// Full amplified-readout prediction at sideband frequency `omega`
/// (normalized to the OPO half-linewidth; the OPA response is taken flat,
/// which holds well inside its linewidth).
///
/// The squeezing phase jitter mixes the OPO output pair; the amplifier
/// phase jitter mixes the detected OPA-frame variances of both the signal
/// and the shot-noise reference, and the reported effective variances are
/// the ratio of the two jittered means. The cross term between the two
/// jitters averages to zero for symmetric jitter and is neglected.
pub fn amplified_readout_sideband(
    cfg: &ChainConfig,
    omega: f64,
) -> Result<ReadoutPrediction, ChainError> {
    let eta_opa = cfg.budget.eta_opa();
    if !(0.5..=1.0).contains(&eta_opa) {
        return Err(ChainError::OpaEscapeOutOfModel(eta_opa));
    }
    let eta_det = cfg.budget.eta_det_total();
    let input = cavity_response(cfg.x_opo, cfg.budget.eta_sqz_tilde(), omega);
    let d = detected_frame(cfg, input, eta_det);
    let (c2, s2) = cfg.theta_opa.mixing_weights();
    let reference = d.shot_meas * c2 + d.shot_orth * s2;
    Ok(ReadoutPrediction {
        v_eff_minus: (d.meas_sqz * c2 + d.orth_sqz * s2) / reference,
        v_eff_plus: (d.meas_anti * c2 + d.orth_anti * s2) / reference,
        amplified_shot_gain: d.shot_meas,
        eta_eff: match cfg.opa_quadrature {
            OpaQuadrature::Amplify => effective_efficiency(cfg.x_opa, eta_opa, eta_det)?,
            // same construction on the deamplified channel
            OpaQuadrature::Deamplify => {
                let (_, _, t_de2, _) = opa_transmissions(cfg.x_opa, eta_opa);
                eta_det * t_de2 / d.shot_meas
            }
        },
    })
}

/// [`amplified_readout_sideband`] at zero sideband frequency.
pub fn amplified_readout(cfg: &ChainConfig) -> Result<ReadoutPrediction, ChainError> {
    amplified_readout_sideband(cfg, 0.0)
}
