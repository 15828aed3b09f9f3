//! Zero-span noise traces and dark-noise-clearance arithmetic.
//!
//! Trace levels are constant in time (zero-span measurements at a fixed
//! analysis frequency); synthesis adds Gaussian scatter in dB on top of
//! each level. Dark noise is additive, quadrature-independent, and
//! normalized to the unamplified shot noise. Observed squeezing divides
//! by `1 + d` because the measured shot-noise reference carries the same
//! dark contribution as the signal trace.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::gaussian::derive_stream_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("dark-noise level must be finite, got {0}")]
    NonFiniteLevel(f64),
    #[error("need at least one bin")]
    NoBins,
    #[error("trace scatter must be finite and >= 0, got {0}")]
    InvalidScatter(f64),
    #[error("bin duration must be positive, got {0}")]
    InvalidBinDuration(f64),
    #[error("no trace levels given")]
    NoLevels,
    #[error("reference trace '{0}' is not among the labels")]
    UnknownReference(String),
}

/// Detector/electronics noise floor relative to unamplified shot noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloor {
    dark_rel_shot_db: f64,
}

impl NoiseFloor {
    pub fn new(dark_rel_shot_db: f64) -> Result<Self, SpectraError> {
        if dark_rel_shot_db.is_finite() {
            Ok(Self { dark_rel_shot_db })
        } else {
            Err(SpectraError::NonFiniteLevel(dark_rel_shot_db))
        }
    }

    pub fn dark_rel_shot_db(&self) -> f64 {
        self.dark_rel_shot_db
    }
}

/// Separation between a noise level and the floor below it.
pub fn clearance(shot_db: f64, dark_db: f64) -> f64 {
    shot_db - dark_db
}

/// Variance observed on a dark-noise-limited analyzer:
/// `v_obs = (v + d)/(1 + d)` with `d` the dark noise relative to the
/// amplified shot noise, `d = 10^((dark_rel_shot_db - amplification_db)/10)`.
/// Recovers `v` as the clearance grows and saturates at shot noise when
/// the floor dominates.
pub fn dark_limited_variance(v: f64, floor: NoiseFloor, amplification_db: f64) -> f64 {
    debug_assert!(v > 0.0);
    let d = 10f64.powf((floor.dark_rel_shot_db - amplification_db) / 10.0);
    (v + d) / (1.0 + d)
}

/// A set of equal-length zero-span traces in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    labels: Vec<String>,
    reference: String,
    samples: Vec<Vec<f64>>,
    bin_duration: f64,
}

impl TraceSet {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Label of the trace the others are normalized against.
    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn n_bins(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn bin_duration(&self) -> f64 {
        self.bin_duration
    }

    pub fn trace(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.samples[i].as_slice())
    }

    pub fn traces(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.samples.iter().map(Vec::as_slice))
    }

    pub fn mean(&self, label: &str) -> Option<f64> {
        self.trace(label)
            .map(|t| t.iter().sum::<f64>() / t.len() as f64)
    }
}

/// Synthesize flat zero-span traces with Gaussian dB scatter.
///
/// Each trace draws from its own substream derived from `(seed, index)`,
/// so outputs are deterministic and independent of the other traces.
pub fn synthesize_zero_span(
    levels: &[(&str, f64)],
    reference: &str,
    n_bins: usize,
    scatter_db: f64,
    bin_duration: f64,
    seed: u64,
) -> Result<TraceSet, SpectraError> {
    if levels.is_empty() {
        return Err(SpectraError::NoLevels);
    }
    if n_bins == 0 {
        return Err(SpectraError::NoBins);
    }
    if !(scatter_db.is_finite() && scatter_db >= 0.0) {
        return Err(SpectraError::InvalidScatter(scatter_db));
    }
    if !(bin_duration.is_finite() && bin_duration > 0.0) {
        return Err(SpectraError::InvalidBinDuration(bin_duration));
    }
    if !levels.iter().any(|(label, _)| *label == reference) {
        return Err(SpectraError::UnknownReference(reference.to_string()));
    }
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let samples = levels
        .iter()
        .enumerate()
        .map(|(i, &(_, level))| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_stream_seed(seed, i as u64));
            (0..n_bins)
                .map(|_| level + scatter_db * unit.sample(&mut rng))
                .collect()
        })
        .collect();
    Ok(TraceSet {
        labels: levels.iter().map(|(l, _)| l.to_string()).collect(),
        reference: reference.to_string(),
        samples,
        bin_duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn clearance_is_a_difference_and_antisymmetric() {
        assert_eq!(clearance(3.0, 3.0), 0.0);
        assert_eq!(clearance(0.0, -1.0), 1.0);
        // the amplifier lifts the clearance by its gain
        assert_eq!(clearance(12.0, -1.0), 13.0);
        for (a, b) in [(0.5, -3.2), (10.0, 1.0), (-4.0, -7.0)] {
            assert_eq!(clearance(a, b), -clearance(b, a));
        }
    }

    #[test]
    fn dark_limited_variance_limits() {
        let floor = NoiseFloor::new(-300.0).unwrap();
        assert_relative_eq!(dark_limited_variance(0.25, floor, 0.0), 0.25, max_relative = 1e-12);

        // overwhelming floor pins the observation at shot noise
        let floor = NoiseFloor::new(100.0).unwrap();
        assert_abs_diff_eq!(dark_limited_variance(0.25, floor, 0.0), 1.0, epsilon = 1e-6);

        assert!(NoiseFloor::new(f64::NAN).is_err());
    }

    #[test]
    fn dark_limited_variance_reference_points() {
        // 1 dB unamplified clearance, 12 dB of amplification
        let floor = NoiseFloor::new(-1.0).unwrap();
        let v = 0.243;
        let amplified = dark_limited_variance(v, floor, 12.0);
        assert_abs_diff_eq!(amplified, 0.279129, epsilon = 1e-5);
        assert_abs_diff_eq!(10.0 * amplified.log10(), -5.5419, epsilon = 1e-3);

        let unamplified = dark_limited_variance(v, floor, 0.0);
        assert_abs_diff_eq!(unamplified, 0.578115, epsilon = 1e-5);
        assert_abs_diff_eq!(10.0 * unamplified.log10(), -2.3799, epsilon = 1e-3);
    }

    #[test]
    fn dark_limited_variance_is_monotone_in_the_floor() {
        // increasing floor raises squeezed levels, lowers antisqueezed
        // ones, and fixes shot noise
        let mut last_sqz = 0.0;
        let mut last_anti = f64::INFINITY;
        for dark in [-30.0, -20.0, -10.0, 0.0, 10.0] {
            let floor = NoiseFloor::new(dark).unwrap();
            let sqz = dark_limited_variance(0.2, floor, 0.0);
            let anti = dark_limited_variance(5.0, floor, 0.0);
            assert!(sqz > last_sqz && anti < last_anti);
            assert_relative_eq!(dark_limited_variance(1.0, floor, 0.0), 1.0, max_relative = 1e-15);
            last_sqz = sqz;
            last_anti = anti;
        }
    }

    #[test]
    fn synthesis_zero_scatter_is_flat() {
        let t = synthesize_zero_span(
            &[("squeezing", -8.1), ("shot", 0.0)],
            "shot",
            64,
            0.0,
            0.01,
            1,
        )
        .unwrap();
        assert!(t.trace("squeezing").unwrap().iter().all(|&v| v == -8.1));
        assert_eq!(t.n_bins(), 64);
        assert_eq!(t.reference(), "shot");
    }

    #[test]
    fn synthesis_is_deterministic_and_mean_converges() {
        let levels = [("a", -3.0), ("b", 2.5), ("c", 0.0)];
        let t1 = synthesize_zero_span(&levels, "c", 4000, 0.2, 0.01, 77).unwrap();
        let t2 = synthesize_zero_span(&levels, "c", 4000, 0.2, 0.01, 77).unwrap();
        assert_eq!(t1, t2);
        let t3 = synthesize_zero_span(&levels, "c", 4000, 0.2, 0.01, 78).unwrap();
        assert_ne!(t1, t3);

        let n = 4000f64;
        for (label, level) in levels {
            let mean = t1.mean(label).unwrap();
            assert!(
                (mean - level).abs() <= 3.0 * 0.2 / n.sqrt(),
                "{label}: mean {mean} vs level {level}"
            );
        }
    }

    #[test]
    fn synthesis_scatter_matches_request() {
        // sample variance within chi-square bounds for n = 4000
        let t = synthesize_zero_span(&[("x", 1.0)], "x", 4000, 0.3, 0.01, 5).unwrap();
        let trace = t.trace("x").unwrap();
        let mean = trace.iter().sum::<f64>() / trace.len() as f64;
        let var = trace.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (trace.len() - 1) as f64;
        // +/- 5 sigma of the chi-square spread: sd(s^2) ~ sigma^2 sqrt(2/n)
        let spread = 0.3f64.powi(2) * (2.0 / 4000f64).sqrt();
        assert!((var - 0.09).abs() < 5.0 * spread, "variance {var}");
    }

    #[test]
    fn synthesis_input_validation() {
        assert!(matches!(
            synthesize_zero_span(&[], "x", 10, 0.1, 0.01, 1),
            Err(SpectraError::NoLevels)
        ));
        assert!(matches!(
            synthesize_zero_span(&[("x", 0.0)], "x", 0, 0.1, 0.01, 1),
            Err(SpectraError::NoBins)
        ));
        assert!(matches!(
            synthesize_zero_span(&[("x", 0.0)], "x", 10, -0.1, 0.01, 1),
            Err(SpectraError::InvalidScatter(_))
        ));
        assert!(matches!(
            synthesize_zero_span(&[("x", 0.0)], "y", 10, 0.1, 0.01, 1),
            Err(SpectraError::UnknownReference(_))
        ));
    }
}
