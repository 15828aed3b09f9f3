//! Damped least-squares (Levenberg-Marquardt) optimizer over a numerical
//! Jacobian.
//!
//! The Jacobian uses central differences with step `max(1e-7, 1e-7 |p|)`.
//! Steps are accepted only when they do not increase chi2, so chi2 is
//! monotone non-increasing across accepted steps. Optional box bounds are
//! enforced by projecting trial points (and difference probes) into the
//! box; a parameter pinned at a bound with the gradient pointing outward
//! simply stops moving.

use nalgebra::{DMatrix, DVector};

use super::FitError;

/// Optimizer knobs; the defaults implement the documented contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the accepted step satisfies `|step| <= tol * (1 + |p|)`.
    pub relative_step_tol: f64,
    /// Stop when the gradient infinity-norm falls below this.
    pub gradient_tol: f64,
    /// Give up when the damping parameter exceeds this without progress.
    pub max_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            relative_step_tol: 1e-10,
            gradient_tol: 1e-12,
            max_damping: 1e12,
        }
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    StepSize,
    Gradient,
    ZeroResidual,
}

/// Converged optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `(J^T J)^+` at the solution; parameter covariance when residuals
    /// are pre-scaled by their known standard deviations.
    pub covariance: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

fn clamp_into(p: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

fn eval_checked<F>(f: &F, p: &[f64]) -> Result<DVector<f64>, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let r = f(p)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteResidual { params: p.to_vec() });
    }
    Ok(DVector::from_vec(r))
}

fn numerical_jacobian<F>(
    f: &F,
    p: &[f64],
    m: usize,
    bounds: Option<&[(f64, f64)]>,
    evaluations: &mut usize,
) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let h = 1e-7f64.max(1e-7 * p[j].abs());
        let mut fwd = p.to_vec();
        let mut bwd = p.to_vec();
        fwd[j] += h;
        bwd[j] -= h;
        clamp_into(&mut fwd, bounds);
        clamp_into(&mut bwd, bounds);
        let span = fwd[j] - bwd[j];
        if span == 0.0 {
            continue; // parameter boxed to a point: treat as fixed
        }
        let rf = eval_checked(f, &fwd)?;
        let rb = eval_checked(f, &bwd)?;
        *evaluations += 2;
        jac.set_column(j, &((rf - rb) / span));
    }
    Ok(jac)
}

fn pseudo_inverse_of_normal(jac: &DMatrix<f64>) -> DMatrix<f64> {
    // (J^T J)^+ = V diag(1/sigma^2) V^T, dropping tiny singular values
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-12;
    let inv_s2 = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values
            .iter()
            .map(|&s| if s > cutoff { 1.0 / (s * s) } else { 0.0 }),
    );
    v_t.transpose() * DMatrix::from_diagonal(&inv_s2) * v_t
}

/// Minimize `|f(p)|^2` from `init`, optionally inside box `bounds`.
pub fn lm_optimize<F>(
    f: F,
    init: &[f64],
    bounds: Option<&[(f64, f64)]>,
    opts: &LmOptions,
) -> Result<LmOutcome, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let n = init.len();
    assert!(n > 0, "need at least one parameter");
    if let Some(b) = bounds {
        assert_eq!(b.len(), n, "one bound pair per parameter");
    }
    let mut p = init.to_vec();
    clamp_into(&mut p, bounds);

    let mut evaluations = 0usize;
    let mut residuals = eval_checked(&f, &p)?;
    evaluations += 1;
    let m = residuals.len();
    if m < n {
        return Err(FitError::Underdetermined {
            residuals: m,
            params: n,
        });
    }
    let mut chi2 = residuals.norm_squared();
    let mut lambda = 0.0f64;
    let mut reason = None;
    let mut iterations = 0;

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let jac = numerical_jacobian(&f, &p, m, bounds, &mut evaluations)?;

        if iter == 1 {
            let svd = jac.clone().svd(false, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smax <= 0.0 || smin < 1e-10 * smax {
                let v_t = svd.v_t.expect("requested V^T");
                let null = v_t.row(v_t.nrows() - 1);
                let direction = null
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{c:+.3}*p{i}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                return Err(FitError::RankDeficient { direction });
            }
        }

        let gradient = jac.transpose() * &residuals;
        if gradient.amax() < opts.gradient_tol {
            reason = Some(StopReason::Gradient);
            break;
        }
        let jtj = jac.transpose() * &jac;
        let diag_scale = jtj.diagonal().max().max(1e-300);

        let mut stepped = false;
        for _ in 0..60 {
            let mut damped = jtj.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * jtj[(j, j)].max(1e-12 * diag_scale);
            }
            let Some(chol) = damped.cholesky() else {
                lambda = if lambda == 0.0 { 1e-4 } else { lambda * 10.0 };
                if lambda > opts.max_damping {
                    break;
                }
                continue;
            };
            let delta = chol.solve(&(-&gradient));
            let mut trial = p.clone();
            for j in 0..n {
                trial[j] += delta[j];
            }
            clamp_into(&mut trial, bounds);
            let step_norm: f64 = trial
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if step_norm == 0.0 {
                // fully pinned against the bounds (or a null step)
                reason = Some(StopReason::StepSize);
                stepped = true;
                break;
            }
            let trial_residuals = eval_checked(&f, &trial)?;
            evaluations += 1;
            let trial_chi2 = trial_residuals.norm_squared();
            if trial_chi2 <= chi2 {
                let p_norm: f64 = trial.iter().map(|v| v * v).sum::<f64>().sqrt();
                p = trial;
                residuals = trial_residuals;
                chi2 = trial_chi2;
                lambda = if lambda <= 1e-12 { 0.0 } else { lambda / 10.0 };
                if step_norm <= opts.relative_step_tol * (1.0 + p_norm) {
                    reason = Some(StopReason::StepSize);
                } else if chi2 <= 1e-30 {
                    reason = Some(StopReason::ZeroResidual);
                }
                stepped = true;
                break;
            }
            lambda = if lambda == 0.0 { 1e-4 } else { lambda * 10.0 };
            if lambda > opts.max_damping {
                break;
            }
        }
        if !stepped {
            return Err(FitError::NoConvergence {
                iterations: iter,
                chi2,
                gradient: gradient.amax(),
                params: p,
            });
        }
        if reason.is_some() {
            break;
        }
    }

    let Some(reason) = reason else {
        let jac = numerical_jacobian(&f, &p, m, bounds, &mut evaluations)?;
        let gradient = (jac.transpose() * &residuals).amax();
        return Err(FitError::NoConvergence {
            iterations,
            chi2,
            gradient,
            params: p,
        });
    };

    // covariance from a fresh Jacobian at the solution
    let jac = numerical_jacobian(&f, &p, m, bounds, &mut evaluations)?;
    Ok(LmOutcome {
        covariance: pseudo_inverse_of_normal(&jac),
        params: p,
        residuals: residuals.iter().copied().collect(),
        chi2,
        iterations,
        evaluations,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn linear_problem_lands_on_normal_equations_immediately() {
        // r = A p - b with A well-conditioned: one Gauss-Newton step
        let a = [[2.0, 1.0], [1.0, 3.0], [0.5, -1.0]];
        let b = [1.0, 2.0, 0.3];
        let f = |p: &[f64]| {
            Ok((0..3)
                .map(|i| a[i][0] * p[0] + a[i][1] * p[1] - b[i])
                .collect())
        };
        let out = lm_optimize(f, &[10.0, -10.0], None, &LmOptions::default()).unwrap();
        assert!(out.iterations <= 2, "took {} iterations", out.iterations);

        // explicit normal-equation solution
        let amat = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 1.0, 3.0, 0.5, -1.0]);
        let bvec = DVector::from_row_slice(&b);
        let sol = (amat.transpose() * &amat)
            .cholesky()
            .unwrap()
            .solve(&(amat.transpose() * bvec));
        assert_abs_diff_eq!(out.params[0], sol[0], epsilon = 1e-10);
        assert_abs_diff_eq!(out.params[1], sol[1], epsilon = 1e-10);
    }

    #[test]
    fn rosenbrock_valley() {
        let f = |p: &[f64]| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
        let out = lm_optimize(f, &[-1.2, 1.0], None, &LmOptions::default()).unwrap();
        assert!(out.iterations <= 200);
        assert_abs_diff_eq!(out.params[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(out.params[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn pinned_parameter_satisfies_the_outward_gradient_condition() {
        // minimum of (p - 2)^2 under p <= 1 sits at the bound
        let f = |p: &[f64]| Ok(vec![p[0] - 2.0]);
        let out = lm_optimize(f, &[0.0], Some(&[(-10.0, 1.0)]), &LmOptions::default()).unwrap();
        assert_abs_diff_eq!(out.params[0], 1.0, epsilon = 1e-12);
        // gradient of chi2/2 at the bound pushes toward larger p
        let gradient = 1.0 * (out.params[0] - 2.0);
        assert!(gradient < 0.0);
    }

    #[test]
    fn non_finite_objective_is_reported_with_parameters() {
        let f = |p: &[f64]| {
            Ok(vec![if p[0] > 0.5 {
                f64::NAN
            } else {
                p[0] - 2.0
            }])
        };
        let err = lm_optimize(f, &[1.0, 0.0][..1].as_ref(), None, &LmOptions::default());
        match err {
            Err(FitError::NonFiniteResidual { params }) => assert_eq!(params, vec![1.0]),
            other => panic!("expected NonFiniteResidual, got {other:?}"),
        }
    }

    #[test]
    fn rank_deficient_jacobian_names_a_direction() {
        // two perfectly correlated parameters
        let f = |p: &[f64]| Ok(vec![p[0] + p[1] - 1.0, 2.0 * (p[0] + p[1]) - 2.0]);
        let err = lm_optimize(f, &[0.0, 0.0], None, &LmOptions::default());
        match err {
            Err(FitError::RankDeficient { direction }) => {
                assert!(direction.contains("p0") && direction.contains("p1"));
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn covariance_matches_the_linear_theory() {
        // r_i = (p0 + x_i p1 - y_i)/sigma: covariance is (X^T X)^-1 sigma^2
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.1, 1.1, 1.9, 3.2];
        let sigma = 0.1;
        let f = move |p: &[f64]| {
            Ok(xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (p[0] + x * p[1] - y) / sigma)
                .collect())
        };
        let out = lm_optimize(f, &[0.0, 0.0], None, &LmOptions::default()).unwrap();
        let design = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let expected = (design.transpose() * design).try_inverse().unwrap() * sigma * sigma;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(out.covariance[(i, j)], expected[(i, j)], max_relative = 1e-6);
            }
        }
    }
}
