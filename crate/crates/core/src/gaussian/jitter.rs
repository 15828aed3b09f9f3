//! Deterministic samplers realizing the phase-jitter models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::types::{JitterModel, PhaseJitter};

/// SplitMix64 step, used to derive independent substream seeds from one
/// root seed. The substream index is folded into the state so that
/// `(root, k)` pairs map to well-separated seeds.
pub fn derive_stream_seed(root: u64, stream: u64) -> u64 {
    let mut z = root.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream of phase-jitter samples; identical seeds reproduce identical
/// streams.
#[derive(Debug, Clone)]
pub struct JitterSampler {
    jitter: PhaseJitter,
    rng: ChaCha12Rng,
    normal: Normal<f64>,
}

impl JitterSampler {
    pub fn new(jitter: PhaseJitter, seed: u64) -> Self {
        Self {
            jitter,
            rng: ChaCha12Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    pub fn jitter(&self) -> &PhaseJitter {
        &self.jitter
    }

    /// Next jitter angle in radians.
    pub fn sample(&mut self) -> f64 {
        let rms = self.jitter.rms();
        if rms == 0.0 {
            return 0.0;
        }
        match self.jitter.model() {
            JitterModel::FixedOffset => rms,
            JitterModel::TwoPoint => {
                if self.rng.random::<bool>() {
                    rms
                } else {
                    -rms
                }
            }
            JitterModel::Gaussian => rms * self.normal.sample(&mut self.rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_reproduce_streams() {
        let j = PhaseJitter::new(0.218, JitterModel::Gaussian).unwrap();
        let a: Vec<f64> = {
            let mut s = JitterSampler::new(j, 42);
            (0..1000).map(|_| s.sample()).collect()
        };
        let b: Vec<f64> = {
            let mut s = JitterSampler::new(j, 42);
            (0..1000).map(|_| s.sample()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<f64> = {
            let mut s = JitterSampler::new(j, 43);
            (0..1000).map(|_| s.sample()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn two_point_takes_both_signs() {
        let j = PhaseJitter::new(0.046, JitterModel::TwoPoint).unwrap();
        let mut s = JitterSampler::new(j, 1);
        let samples: Vec<f64> = (0..200).map(|_| s.sample()).collect();
        assert!(samples.iter().all(|&t| t == 0.046 || t == -0.046));
        assert!(samples.iter().any(|&t| t > 0.0) && samples.iter().any(|&t| t < 0.0));
    }

    #[test]
    fn gaussian_mixing_weight_is_close_to_cos2_of_rms() {
        // E[cos^2 theta] = (1 + exp(-2 sigma^2))/2 differs from
        // cos^2(sigma) only at order sigma^4
        let sigma = 0.218;
        let j = PhaseJitter::new(sigma, JitterModel::Gaussian).unwrap();
        let mut s = JitterSampler::new(j, 7);
        let n = 2_000_000;
        let mean_cos2: f64 =
            (0..n).map(|_| s.sample().cos().powi(2)).sum::<f64>() / n as f64;
        let bound = sigma.powi(4);
        assert!(
            (mean_cos2 - sigma.cos().powi(2)).abs() <= bound,
            "|{mean_cos2} - cos^2({sigma})| > {bound}"
        );
    }

    #[test]
    fn zero_rms_is_silent_for_every_model() {
        for model in [JitterModel::FixedOffset, JitterModel::TwoPoint, JitterModel::Gaussian] {
            let mut s = JitterSampler::new(PhaseJitter::new(0.0, model).unwrap(), 5);
            assert!((0..100).all(|_| s.sample() == 0.0));
        }
    }
}
