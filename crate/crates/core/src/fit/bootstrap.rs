//! Parametric bootstrap uncertainties for squeezing-model fits.
//!
//! Each resample redraws the data from the fitted model with the
//! per-record dB noise and refits from the base solution. Case
//! resampling is a poor fit here: typical datasets have only a handful
//! of gain points, so resampled sets routinely lose identifiability.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::gaussian::derive_stream_seed;

use super::model::{fit_from_natural, natural_from_fit, SqueezeModel};
use super::{FitError, FitOptions, FitResult, MeasurementRecord};

/// Spread of the refitted parameters across resamples.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    /// One-sigma spread per free parameter, in fit order.
    pub sigmas: Vec<(&'static str, f64)>,
    /// Mean of each free parameter across resamples.
    pub means: Vec<f64>,
    pub n_resamples: usize,
    pub n_failed: usize,
}

/// Parametric bootstrap around a converged fit. Deterministic given the
/// seed: resample `r` draws from a substream derived from `(seed, r)` and
/// results are reduced in resample order.
pub fn bootstrap_fit(
    records: &[MeasurementRecord],
    options: &FitOptions,
    base: &FitResult,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary, FitError> {
    if n_resamples < 2 {
        return Err(FitError::InvalidOptions(
            "need at least 2 bootstrap resamples".into(),
        ));
    }
    let spec = SqueezeModel::new(records, options)?;
    let start = natural_from_fit(base, options);
    let predictions: Vec<(f64, f64)> = (0..records.len())
        .map(|i| spec.predict_db(i, &start))
        .collect();
    let sigmas_db: Vec<f64> = records
        .iter()
        .map(|r| r.sigma_db().unwrap_or(options.sigma_db_default))
        .collect();

    let samples: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|resample| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_stream_seed(seed, resample as u64));
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let resampled: Vec<MeasurementRecord> = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let (pm, pp) = predictions[i];
                    MeasurementRecord::new(
                        r.gain_opo(),
                        pm + sigmas_db[i] * unit.sample(&mut rng),
                        pp + sigmas_db[i] * unit.sample(&mut rng),
                        r.sigma_db(),
                    )
                    .expect("resampled record stays valid")
                })
                .collect();
            fit_from_natural(&resampled, options, &start)
                .ok()
                .map(|fit| fit.params.iter().map(|p| p.value).collect())
        })
        .collect();

    let n_failed = samples.iter().filter(|s| s.is_none()).count();
    let good: Vec<&Vec<f64>> = samples.iter().flatten().collect();
    if good.len() < 2 || n_failed * 2 > n_resamples {
        return Err(FitError::BootstrapFailed {
            failed: n_failed,
            total: n_resamples,
        });
    }
    let n_params = base.params.len();
    let n = good.len() as f64;
    let means: Vec<f64> = (0..n_params)
        .map(|j| good.iter().map(|s| s[j]).sum::<f64>() / n)
        .collect();
    let sigmas = base
        .params
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let var = good
                .iter()
                .map(|s| (s[j] - means[j]) * (s[j] - means[j]))
                .sum::<f64>()
                / (n - 1.0);
            (p.name, var.sqrt())
        })
        .collect();
    Ok(BootstrapSummary {
        sigmas,
        means,
        n_resamples,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{apply_phase_jitter, opo_output_variance};
    use crate::fit::fit_squeezing_model;
    use crate::types::{JitterModel, PhaseJitter, PumpDrive};

    fn noisy_records(seed: u64) -> Vec<MeasurementRecord> {
        let jitter = PhaseJitter::new(0.046, JitterModel::TwoPoint).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&g| {
                let pair = apply_phase_jitter(
                    opo_output_variance(PumpDrive::from_gain(g).unwrap(), 0.6909),
                    &jitter,
                );
                MeasurementRecord::new(
                    g,
                    pair.v_minus_db() + 0.1 * unit.sample(&mut rng),
                    pair.v_plus_db() + 0.1 * unit.sample(&mut rng),
                    Some(0.1),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn bootstrap_is_deterministic_under_seed() {
        let records = noisy_records(1);
        let options = FitOptions::direct();
        let fit = fit_squeezing_model(&records, &options).unwrap();
        let a = bootstrap_fit(&records, &options, &fit, 50, 99).unwrap();
        let b = bootstrap_fit(&records, &options, &fit, 50, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_and_jacobian_sigmas_agree() {
        // loose 30% agreement on a well-conditioned synthetic fit
        let records = noisy_records(2);
        let options = FitOptions::direct();
        let fit = fit_squeezing_model(&records, &options).unwrap();
        let boot = bootstrap_fit(&records, &options, &fit, 400, 7).unwrap();
        for (param, (name, boot_sigma)) in fit.params.iter().zip(&boot.sigmas) {
            assert_eq!(param.name, *name);
            let rel = (param.sigma - boot_sigma).abs() / param.sigma;
            assert!(
                rel < 0.3,
                "{name}: jacobian {} vs bootstrap {boot_sigma}",
                param.sigma
            );
        }
    }

    #[test]
    fn rejects_tiny_resample_counts() {
        let records = noisy_records(3);
        let options = FitOptions::direct();
        let fit = fit_squeezing_model(&records, &options).unwrap();
        assert!(bootstrap_fit(&records, &options, &fit, 1, 5).is_err());
    }
}
