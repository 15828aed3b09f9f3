//! Gaussian states of N bosonic modes as mean vector + covariance matrix.
//!
//! Quadratures are ordered `(x1, p1, x2, p2, ...)` and normalized so the
//! vacuum covariance is the identity. Physical states satisfy
//! `cov + i*Omega >= 0`, i.e. every symplectic eigenvalue is >= 1.
//!
//! Cavity stages (OPO, OPA) at zero sideband frequency are represented in
//! two equivalent ways:
//!
//! * a single-pass squeezer with `r = ln((1+x)/(1-x))` followed by a
//!   beamsplitter of transmissivity `eta` — exact for a vacuum input, and
//!   used here for the OPO;
//! * the two-port input-output relation with signal amplitudes
//!   `(2*eta - 1 ± x)/(1 ∓ x)` on the amplified/deamplified quadratures
//!   and a vacuum ancilla on the loss port — required for the OPA, whose
//!   input is not vacuum. At `x = 0` it reduces to a reflection with
//!   amplitude `2*eta - 1`. Squeezer-plus-loss does not reproduce this
//!   map for non-vacuum inputs; the two forms agree only on vacuum.

use nalgebra::{DMatrix, DVector};

/// Mean vector and covariance matrix of N modes in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// The symplectic form `Omega = diag([[0, 1], [-1, 0]], ...)`.
pub(crate) fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// Rotation of the quadrature frame by `angle`.
pub(crate) fn rotation_matrix(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Single-mode squeezer: squeezes the quadrature at `angle` by `e^{-r}`
/// (amplitude) and antisqueezes the orthogonal one.
pub(crate) fn squeeze_matrix(r: f64, angle: f64) -> DMatrix<f64> {
    let rot = rotation_matrix(angle);
    let diag = DMatrix::from_row_slice(2, 2, &[(-r).exp(), 0.0, 0.0, r.exp()]);
    &rot * diag * rot.transpose()
}

/// Two-mode beamsplitter of power transmissivity `eta`.
pub(crate) fn beamsplitter_matrix(eta: f64) -> DMatrix<f64> {
    let t = eta.sqrt();
    let r = (1.0 - eta).sqrt();
    #[rustfmt::skip]
    let s = DMatrix::from_row_slice(4, 4, &[
         t,  0.0,  r,  0.0,
        0.0,  t,  0.0,  r,
        -r,  0.0,  t,  0.0,
        0.0, -r,  0.0,  t,
    ]);
    s
}

/// Two-port cavity stage (signal mode + loss-port vacuum ancilla) pumped
/// to amplify the signal `x` quadrature. Signal amplitudes are
/// `t_x = (2*eta - 1 + x)/(1 - x)` and `t_p = (2*eta - 1 - x)/(1 + x)`;
/// the ancilla rows complete the matrix to a symplectic one.
pub(crate) fn cavity_twoport_matrix(x: f64, eta: f64) -> DMatrix<f64> {
    let c = 2.0 * (eta * (1.0 - eta)).sqrt();
    let t_x = (2.0 * eta - 1.0 + x) / (1.0 - x);
    let c_x = c / (1.0 - x);
    let t_p = (2.0 * eta - 1.0 - x) / (1.0 + x);
    let c_p = c / (1.0 + x);
    #[rustfmt::skip]
    let s = DMatrix::from_row_slice(4, 4, &[
         t_x,  0.0,  c_x,  0.0,
         0.0,  t_p,  0.0,  c_p,
        -c_p,  0.0,  t_p,  0.0,
         0.0, -c_x,  0.0,  t_x,
    ]);
    s
}

impl GaussianState {
    /// N-mode vacuum: zero mean, identity covariance.
    pub fn vacuum(n_modes: usize) -> Self {
        assert!(n_modes > 0, "need at least one mode");
        Self {
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Build from raw mean and covariance; the covariance must be
    /// symmetric within 1e-12.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, String> {
        let n = mean.len();
        if n == 0 || n % 2 != 0 {
            return Err(format!("mean length {n} is not twice a mode count"));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(format!(
                "covariance is {}x{}, expected {n}x{n}",
                cov.nrows(),
                cov.ncols()
            ));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(format!("covariance asymmetric by {asym:e}"));
        }
        Ok(Self { mean, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Apply a symplectic matrix acting on the listed modes (in the order
    /// the matrix expects them).
    pub fn apply_symplectic(&mut self, modes: &[usize], s: &DMatrix<f64>) {
        let k = modes.len();
        assert_eq!(s.nrows(), 2 * k);
        assert_eq!(s.ncols(), 2 * k);
        for &m in modes {
            assert!(m < self.n_modes(), "mode {m} out of range");
        }
        let n2 = self.mean.len();
        let mut full = DMatrix::identity(n2, n2);
        for (a, &ma) in modes.iter().enumerate() {
            for (b, &mb) in modes.iter().enumerate() {
                for ia in 0..2 {
                    for ib in 0..2 {
                        full[(2 * ma + ia, 2 * mb + ib)] = s[(2 * a + ia, 2 * b + ib)];
                    }
                }
            }
        }
        self.mean = &full * &self.mean;
        self.cov = &full * &self.cov * full.transpose();
        // keep the matrix exactly symmetric against rounding drift
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        self.cov = sym;
    }

    /// Append a fresh vacuum mode; returns its index.
    pub fn add_vacuum_mode(&mut self) -> usize {
        let n2 = self.mean.len();
        let mut cov = DMatrix::identity(n2 + 2, n2 + 2);
        cov.view_mut((0, 0), (n2, n2)).copy_from(&self.cov);
        self.cov = cov;
        self.mean = DVector::from_fn(n2 + 2, |i, _| if i < n2 { self.mean[i] } else { 0.0 });
        self.n_modes() - 1
    }

    /// Trace out (discard) one mode.
    pub fn trace_out(&mut self, mode: usize) {
        assert!(mode < self.n_modes());
        let keep: Vec<usize> = (0..self.mean.len()).filter(|i| i / 2 != mode).collect();
        self.mean = DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.mean[i]));
        self.cov = self.cov.select_rows(&keep).select_columns(&keep);
    }

    /// Squeeze `mode` by parameter `r` with the squeezed axis at `angle`.
    pub fn apply_squeezer(&mut self, mode: usize, r: f64, angle: f64) {
        assert!(r.is_finite());
        self.apply_symplectic(&[mode], &squeeze_matrix(r, angle));
    }

    /// Rotate the quadrature frame of `mode` by `angle`.
    pub fn apply_rotation(&mut self, mode: usize, angle: f64) {
        self.apply_symplectic(&[mode], &rotation_matrix(angle));
    }

    /// Beamsplitter loss of transmissivity `eta`: couple a fresh vacuum
    /// ancilla on a beamsplitter and trace it out.
    pub fn apply_beamsplitter_loss(&mut self, mode: usize, eta: f64) {
        assert!((0.0..=1.0).contains(&eta));
        let ancilla = self.add_vacuum_mode();
        self.apply_symplectic(&[mode, ancilla], &beamsplitter_matrix(eta));
        self.trace_out(ancilla);
    }

    /// Two-port cavity parametric stage on `mode` with pump `x`, escape
    /// efficiency `eta`, and the amplified axis at `angle`; the loss-port
    /// vacuum ancilla is traced out.
    pub fn apply_cavity_twoport(&mut self, mode: usize, x: f64, eta: f64, angle: f64) {
        assert!((0.0..1.0).contains(&x));
        assert!((0.0..=1.0).contains(&eta));
        self.apply_rotation(mode, -angle);
        let ancilla = self.add_vacuum_mode();
        self.apply_symplectic(&[mode, ancilla], &cavity_twoport_matrix(x, eta));
        self.trace_out(ancilla);
        self.apply_rotation(mode, angle);
    }

    /// Variance of the quadrature `x cos(angle) + p sin(angle)` of `mode`.
    pub fn homodyne_variance(&self, mode: usize, angle: f64) -> f64 {
        assert!(mode < self.n_modes());
        let (s, c) = angle.sin_cos();
        let i = 2 * mode;
        c * c * self.cov[(i, i)] + s * s * self.cov[(i + 1, i + 1)] + 2.0 * s * c * self.cov[(i, i + 1)]
    }

    /// Symplectic eigenvalues (one per mode, each >= 1 for physical states).
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let m = symplectic_form(self.n_modes()) * &self.cov;
        let mut nus: Vec<f64> = m.complex_eigenvalues().iter().map(|e| e.im.abs()).collect();
        nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // eigenvalues come in +/- i*nu pairs
        nus.into_iter().skip(1).step_by(2).collect()
    }

    /// All symplectic eigenvalues at least `1 - tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues().iter().all(|&nu| nu >= 1.0 - tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn assert_symplectic(s: &DMatrix<f64>) {
        let n = s.nrows() / 2;
        let omega = symplectic_form(n);
        let dev = (s * &omega * s.transpose() - &omega).abs().max();
        assert!(dev < 1e-12, "S Omega S^T deviates by {dev:e}");
    }

    #[test]
    fn generator_matrices_are_symplectic() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            assert_symplectic(&rotation_matrix(rng.random_range(-6.0..6.0)));
            assert_symplectic(&squeeze_matrix(
                rng.random_range(-3.0..3.0),
                rng.random_range(-6.0..6.0),
            ));
            assert_symplectic(&beamsplitter_matrix(rng.random_range(0.0..1.0)));
            assert_symplectic(&cavity_twoport_matrix(
                rng.random_range(0.0..0.99),
                rng.random_range(0.0..1.0),
            ));
        }
    }

    #[test]
    fn squeezer_identity_and_reference() {
        let mut s = GaussianState::vacuum(1);
        let before = s.clone();
        s.apply_squeezer(0, 0.0, 0.0);
        assert_eq!(s, before);

        let mut s = GaussianState::vacuum(1);
        s.apply_squeezer(0, 3f64.ln(), 0.0);
        assert_relative_eq!(s.homodyne_variance(0, 0.0), 1.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(s.homodyne_variance(0, FRAC_PI_2), 9.0, max_relative = 1e-12);
        // pure state: unit determinant and unit symplectic eigenvalue
        assert_relative_eq!(s.cov().determinant(), 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(s.symplectic_eigenvalues()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezer_plus_loss_matches_parametric_output_variance() {
        use crate::chain::opo_output_variance;
        use crate::types::PumpDrive;
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..200 {
            let x: f64 = rng.random_range(0.0..0.98);
            let eta = rng.random_range(0.0..1.0);
            let mut s = GaussianState::vacuum(1);
            s.apply_squeezer(0, ((1.0 + x) / (1.0 - x)).ln(), 0.0);
            s.apply_beamsplitter_loss(0, eta);
            let closed = opo_output_variance(PumpDrive::new(x).unwrap(), eta);
            assert_relative_eq!(s.homodyne_variance(0, 0.0), closed.v_minus(), max_relative = 1e-12);
            assert_relative_eq!(
                s.homodyne_variance(0, FRAC_PI_2),
                closed.v_plus(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn beamsplitter_loss_cases() {
        let mut s = GaussianState::vacuum(1);
        s.apply_squeezer(0, 3f64.ln(), 0.0);

        let mut lossless = s.clone();
        lossless.apply_beamsplitter_loss(0, 1.0);
        assert_relative_eq!(lossless.homodyne_variance(0, 0.0), 1.0 / 9.0, max_relative = 1e-12);

        let mut opaque = s.clone();
        opaque.apply_beamsplitter_loss(0, 0.0);
        assert_relative_eq!(opaque.homodyne_variance(0, 0.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(opaque.homodyne_variance(0, FRAC_PI_2), 1.0, max_relative = 1e-12);

        let mut half = s.clone();
        half.apply_beamsplitter_loss(0, 0.5);
        assert_relative_eq!(half.homodyne_variance(0, 0.0), 5.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(half.homodyne_variance(0, FRAC_PI_2), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn homodyne_angles() {
        let vac = GaussianState::vacuum(2);
        for angle in [0.0, 0.3, FRAC_PI_2, 2.1] {
            assert_relative_eq!(vac.homodyne_variance(1, angle), 1.0, max_relative = 1e-15);
        }
        let mut s = GaussianState::vacuum(1);
        s.apply_squeezer(0, 3f64.ln(), 0.0);
        assert_relative_eq!(
            s.homodyne_variance(0, FRAC_PI_4),
            (1.0 / 9.0 + 9.0) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cavity_twoport_on_vacuum_matches_cavity_output() {
        use crate::chain::opo_output_variance;
        use crate::types::PumpDrive;
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let x = rng.random_range(0.0..0.98);
            let eta = rng.random_range(0.0..1.0);
            let mut s = GaussianState::vacuum(1);
            s.apply_cavity_twoport(0, x, eta, FRAC_PI_2);
            // amplified axis at pi/2: x quadrature is the deamplified one
            let closed = opo_output_variance(PumpDrive::new(x).unwrap(), eta);
            assert_relative_eq!(s.homodyne_variance(0, 0.0), closed.v_minus(), max_relative = 1e-11);
            assert_relative_eq!(
                s.homodyne_variance(0, FRAC_PI_2),
                closed.v_plus(),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn unpumped_cavity_reflects_with_attenuated_amplitude() {
        // at x = 0 the stage is a reflection with amplitude 2*eta - 1
        let eta = 0.973;
        let mut s = GaussianState::vacuum(1);
        s.apply_squeezer(0, 3f64.ln(), 0.0);
        s.apply_cavity_twoport(0, 0.0, eta, 0.0);
        let t2 = (2.0 * eta - 1.0) * (2.0 * eta - 1.0);
        let c2 = 4.0 * eta * (1.0 - eta);
        assert_relative_eq!(
            s.homodyne_variance(0, 0.0),
            t2 / 9.0 + c2,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            s.homodyne_variance(0, FRAC_PI_2),
            t2 * 9.0 + c2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lossy_states_stay_physical() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..100 {
            let mut s = GaussianState::vacuum(1);
            s.apply_squeezer(0, rng.random_range(0.0..2.5), rng.random_range(0.0..3.0));
            s.apply_beamsplitter_loss(0, rng.random_range(0.0..1.0));
            s.apply_cavity_twoport(0, rng.random_range(0.0..0.95), rng.random_range(0.3..1.0), 0.0);
            s.apply_beamsplitter_loss(0, rng.random_range(0.0..1.0));
            assert!(s.is_physical(1e-10), "unphysical state: {:?}", s.symplectic_eigenvalues());
        }
    }

    #[test]
    fn pure_chain_keeps_unit_determinant() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let mut s = GaussianState::vacuum(2);
        for _ in 0..20 {
            s.apply_squeezer(
                rng.random_range(0..2),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.0..3.0),
            );
            s.apply_rotation(rng.random_range(0..2), rng.random_range(0.0..3.0));
            // lossless beamsplitter between the two modes
            s.apply_symplectic(&[0, 1], &beamsplitter_matrix(rng.random_range(0.0..1.0)));
        }
        assert_relative_eq!(s.cov().determinant(), 1.0, max_relative = 1e-9);
        for nu in s.symplectic_eigenvalues() {
            assert_abs_diff_eq!(nu, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let mean = DVector::zeros(4);
        let mut cov = DMatrix::identity(4, 4);
        cov[(0, 1)] = 1e-6; // asymmetric
        assert!(GaussianState::new(mean.clone(), cov).is_err());
        assert!(GaussianState::new(DVector::zeros(3), DMatrix::identity(3, 3)).is_err());
        assert!(GaussianState::new(mean, DMatrix::identity(4, 4)).is_ok());
    }
}
