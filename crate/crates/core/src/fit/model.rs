//! The squeezing measurement model and its fitting front end.

use nalgebra::DMatrix;

use super::lm::{lm_optimize, LmOptions};
use super::{FitError, MeasurementRecord};

const LN10_OVER_10: f64 = core::f64::consts::LN_10 / 10.0;

/// Which efficiency the fitted `eta` stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// OPA bypassed: `eta` is the total path efficiency `eta_total`.
    Direct,
    /// Amplified readout: `eta` is the product `eta_sqz_tilde * eta_eff`.
    Amplified,
}

/// Residual weighting space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSpace {
    /// Residuals in dB, weighted by `sigma_db` (spectrum-analyzer native).
    #[default]
    Decibel,
    /// Residuals in linear variance, weighted by the dB sigma propagated
    /// to linear scale at the measured level.
    Linear,
}

/// Fit configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub model: FitModel,
    pub weight_space: WeightSpace,
    /// Used for records that carry no `sigma_db` (typical zero-span trace
    /// scatter at the modeled resolution/video bandwidths).
    pub sigma_db_default: f64,
    /// Fit a common rescale of the threshold power: pump amplitudes
    /// become `sqrt(scale) * (1 - 1/sqrt(G))`.
    pub fit_threshold_power: bool,
    /// Hold the efficiency fixed at this value instead of fitting it.
    pub fixed_eta: Option<f64>,
    /// Hold the jitter rms fixed at this value instead of fitting it.
    pub fixed_theta: Option<f64>,
    pub init_eta: f64,
    pub init_theta: f64,
    pub init_threshold_scale: f64,
    pub lm: LmOptions,
}

impl FitOptions {
    pub fn direct() -> Self {
        Self {
            model: FitModel::Direct,
            weight_space: WeightSpace::Decibel,
            sigma_db_default: 0.2,
            fit_threshold_power: false,
            fixed_eta: None,
            fixed_theta: None,
            init_eta: 0.7,
            init_theta: 0.05,
            init_threshold_scale: 1.0,
            lm: LmOptions::default(),
        }
    }

    pub fn amplified() -> Self {
        Self {
            model: FitModel::Amplified,
            ..Self::direct()
        }
    }
}

/// One fitted parameter in natural coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedParam {
    pub name: &'static str,
    pub value: f64,
    pub sigma: f64,
}

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

/// Converged fit with uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    /// Free parameters in natural coordinates, in fit order.
    pub params: Vec<FittedParam>,
    /// Covariance in natural coordinates (first-order propagated through
    /// the parameter transforms).
    pub covariance: DMatrix<f64>,
    /// Covariance in the internal (transformed) coordinates the optimizer
    /// actually ran in.
    pub covariance_internal: DMatrix<f64>,
    /// Weighted residuals at the solution, two per record (minus, plus).
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub n_dof: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<FittedParam> {
        self.params.iter().copied().find(|p| p.name == name)
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(e: f64) -> f64 {
    (e / (1.0 - e)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParamKind {
    Eta,
    Theta,
    ThresholdScale,
}

impl ParamKind {
    fn name(self, model: FitModel) -> &'static str {
        match self {
            ParamKind::Eta => match model {
                FitModel::Direct => "eta_total",
                FitModel::Amplified => "eta_product",
            },
            ParamKind::Theta => "theta_rad",
            ParamKind::ThresholdScale => "threshold_scale",
        }
    }
}

/// Internal model evaluator shared by the fit and the bootstrap.
pub(crate) struct SqueezeModel {
    x_nominal: Vec<f64>,
    sigma_db: Vec<f64>,
    data_db: Vec<(f64, f64)>,
    weight_space: WeightSpace,
    fixed_eta: Option<f64>,
    fixed_theta: Option<f64>,
    fit_threshold: bool,
    /// Cap keeping `sqrt(scale) * x_nominal < 1` for every record.
    scale_cap: f64,
    free: Vec<ParamKind>,
}

/// Natural parameter set of the measurement model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NaturalParams {
    pub eta: f64,
    pub theta: f64,
    pub threshold_scale: f64,
}

impl SqueezeModel {
    pub(crate) fn new(records: &[MeasurementRecord], options: &FitOptions) -> Result<Self, FitError> {
        if records.len() < 2 {
            return Err(FitError::TooFewRecords {
                got: records.len(),
                need: 2,
            });
        }
        if let Some(e) = options.fixed_eta {
            if !(0.0..=1.0).contains(&e) {
                return Err(FitError::InvalidOptions(format!(
                    "fixed eta {e} outside [0, 1]"
                )));
            }
        }
        if let Some(t) = options.fixed_theta {
            if !(t.is_finite() && t >= 0.0) {
                return Err(FitError::InvalidOptions(format!("fixed theta {t} invalid")));
            }
        }
        if !(options.sigma_db_default.is_finite() && options.sigma_db_default > 0.0) {
            return Err(FitError::InvalidOptions(
                "default sigma_db must be positive".into(),
            ));
        }
        let mut free = Vec::new();
        if options.fixed_eta.is_none() {
            free.push(ParamKind::Eta);
        }
        if options.fixed_theta.is_none() {
            free.push(ParamKind::Theta);
        }
        if options.fit_threshold_power {
            free.push(ParamKind::ThresholdScale);
        }
        if free.is_empty() {
            return Err(FitError::InvalidOptions("no free parameters".into()));
        }
        if free.len() > 2 * records.len() {
            return Err(FitError::TooManyParameters {
                n_params: free.len(),
                n_constraints: 2 * records.len(),
            });
        }
        let x_nominal: Vec<f64> = records
            .iter()
            .map(|r| 1.0 - 1.0 / r.gain_opo().sqrt())
            .collect();
        let x_max = x_nominal.iter().cloned().fold(0.0f64, f64::max);
        let scale_cap = if x_max > 0.0 {
            (1.0 - 1e-9) / (x_max * x_max)
        } else {
            1e6
        };
        Ok(Self {
            x_nominal,
            sigma_db: records
                .iter()
                .map(|r| r.sigma_db().unwrap_or(options.sigma_db_default))
                .collect(),
            data_db: records
                .iter()
                .map(|r| (r.v_minus_db(), r.v_plus_db()))
                .collect(),
            weight_space: options.weight_space,
            fixed_eta: options.fixed_eta,
            fixed_theta: options.fixed_theta,
            fit_threshold: options.fit_threshold_power,
            scale_cap,
            free,
        })
    }

    fn n_free(&self) -> usize {
        self.free.len()
    }

    fn natural(&self, internal: &[f64]) -> NaturalParams {
        let mut eta = self.fixed_eta.unwrap_or(f64::NAN);
        let mut theta = self.fixed_theta.unwrap_or(f64::NAN);
        let mut scale = 1.0;
        for (kind, &u) in self.free.iter().zip(internal) {
            match kind {
                ParamKind::Eta => eta = logistic(u),
                ParamKind::Theta => theta = u.abs(),
                ParamKind::ThresholdScale => scale = self.scale_cap * logistic(u),
            }
        }
        NaturalParams {
            eta,
            theta,
            threshold_scale: scale,
        }
    }

    fn internal_init(&self, options: &FitOptions) -> Vec<f64> {
        self.free
            .iter()
            .map(|kind| match kind {
                ParamKind::Eta => logit(options.init_eta.clamp(1e-6, 1.0 - 1e-6)),
                ParamKind::Theta => options.init_theta,
                ParamKind::ThresholdScale => {
                    logit((options.init_threshold_scale / self.scale_cap).clamp(1e-9, 1.0 - 1e-9))
                }
            })
            .collect()
    }

    /// Natural -> internal, for seeding refits at a previous solution.
    fn internal_from_natural(&self, natural: &NaturalParams) -> Vec<f64> {
        self.free
            .iter()
            .map(|kind| match kind {
                ParamKind::Eta => logit(natural.eta.clamp(1e-9, 1.0 - 1e-9)),
                ParamKind::Theta => natural.theta,
                ParamKind::ThresholdScale => {
                    logit((natural.threshold_scale / self.scale_cap).clamp(1e-9, 1.0 - 1e-9))
                }
            })
            .collect()
    }

    /// Model prediction for record `i` in dB at the given natural params.
    pub(crate) fn predict_db(&self, i: usize, p: &NaturalParams) -> (f64, f64) {
        let x = p.threshold_scale.sqrt() * self.x_nominal[i];
        let num = 4.0 * x * p.eta;
        let v_minus = 1.0 - num / ((1.0 + x) * (1.0 + x));
        let v_plus = 1.0 + num / ((1.0 - x) * (1.0 - x));
        let (s, c) = p.theta.sin_cos();
        let (c2, s2) = (c * c, s * s);
        let vm = v_minus * c2 + v_plus * s2;
        let vp = v_plus * c2 + v_minus * s2;
        (10.0 * vm.log10(), 10.0 * vp.log10())
    }

    fn residuals(&self, internal: &[f64]) -> Result<Vec<f64>, FitError> {
        let p = self.natural(internal);
        let mut out = Vec::with_capacity(2 * self.x_nominal.len());
        for i in 0..self.x_nominal.len() {
            let (model_m, model_p) = self.predict_db(i, &p);
            let (data_m, data_p) = self.data_db[i];
            let sigma = self.sigma_db[i];
            match self.weight_space {
                WeightSpace::Decibel => {
                    out.push((data_m - model_m) / sigma);
                    out.push((data_p - model_p) / sigma);
                }
                WeightSpace::Linear => {
                    let lin = |db: f64| 10f64.powf(db / 10.0);
                    let res = |data_db: f64, model_db: f64| {
                        let data = lin(data_db);
                        (data - lin(model_db)) / (LN10_OVER_10 * sigma * data)
                    };
                    out.push(res(data_m, model_m));
                    out.push(res(data_p, model_p));
                }
            }
        }
        Ok(out)
    }

    /// Derivatives of the natural parameters with respect to the internal
    /// ones (diagonal, the transforms are componentwise).
    fn transform_jacobian(&self, internal: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .zip(internal)
            .map(|(kind, &u)| match kind {
                ParamKind::Eta => {
                    let l = logistic(u);
                    l * (1.0 - l)
                }
                ParamKind::Theta => {
                    if u >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                ParamKind::ThresholdScale => {
                    let l = logistic(u);
                    self.scale_cap * l * (1.0 - l)
                }
            })
            .collect()
    }

    fn named_error(&self, model: FitModel, err: FitError) -> FitError {
        if let FitError::RankDeficient { direction } = &err {
            // replace the generic p0/p1 labels with parameter names
            let mut named = direction.clone();
            for (i, kind) in self.free.iter().enumerate() {
                named = named.replace(&format!("p{i}"), kind.name(model));
            }
            return FitError::RankDeficient { direction: named };
        }
        err
    }
}

fn run_fit(
    model_spec: &SqueezeModel,
    options: &FitOptions,
    init_internal: Vec<f64>,
) -> Result<FitResult, FitError> {
    let outcome = lm_optimize(
        |u| model_spec.residuals(u),
        &init_internal,
        None,
        &options.lm,
    )
    .map_err(|e| model_spec.named_error(options.model, e))?;

    let natural = model_spec.natural(&outcome.params);
    let t = model_spec.transform_jacobian(&outcome.params);
    let n = model_spec.n_free();
    let covariance = DMatrix::from_fn(n, n, |i, j| t[i] * t[j] * outcome.covariance[(i, j)]);
    let params = model_spec
        .free
        .iter()
        .enumerate()
        .map(|(i, kind)| FittedParam {
            name: kind.name(options.model),
            value: match kind {
                ParamKind::Eta => natural.eta,
                ParamKind::Theta => natural.theta,
                ParamKind::ThresholdScale => natural.threshold_scale,
            },
            sigma: covariance[(i, i)].max(0.0).sqrt(),
        })
        .collect();
    Ok(FitResult {
        model: options.model,
        params,
        covariance,
        covariance_internal: outcome.covariance,
        residuals: outcome.residuals,
        chi2: outcome.chi2,
        n_dof: 2 * model_spec.x_nominal.len() - n,
        iterations: outcome.iterations,
    })
}

/// Weighted least squares over both quadratures of every record.
pub fn fit_squeezing_model(
    records: &[MeasurementRecord],
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    let model_spec = SqueezeModel::new(records, options)?;
    let init = model_spec.internal_init(options);
    run_fit(&model_spec, options, init)
}

/// Refit seeded at a known natural-parameter solution (bootstrap helper).
pub(crate) fn fit_from_natural(
    records: &[MeasurementRecord],
    options: &FitOptions,
    start: &NaturalParams,
) -> Result<FitResult, FitError> {
    let model_spec = SqueezeModel::new(records, options)?;
    let init = model_spec.internal_from_natural(start);
    run_fit(&model_spec, options, init)
}

pub(crate) fn natural_from_fit(fit: &FitResult, options: &FitOptions) -> NaturalParams {
    NaturalParams {
        eta: options
            .fixed_eta
            .or_else(|| {
                fit.param("eta_total")
                    .or_else(|| fit.param("eta_product"))
                    .map(|p| p.value)
            })
            .expect("eta fixed or fitted"),
        theta: options
            .fixed_theta
            .or_else(|| fit.param("theta_rad").map(|p| p.value))
            .expect("theta fixed or fitted"),
        threshold_scale: fit
            .param("threshold_scale")
            .map(|p| p.value)
            .unwrap_or(1.0),
    }
}

/// Divide the fitted `eta_product` by an independently known
/// `eta_sqz_tilde` to obtain the effective readout efficiency, combining
/// both uncertainties in quadrature.
pub fn extract_effective_efficiency(
    fit: &FitResult,
    eta_sqz_tilde: Estimate,
) -> Result<Estimate, FitError> {
    if fit.model != FitModel::Amplified {
        return Err(FitError::MissingProductParameter);
    }
    let product = fit
        .param("eta_product")
        .ok_or(FitError::MissingProductParameter)?;
    if !(eta_sqz_tilde.value > 0.0 && eta_sqz_tilde.value <= 1.0) {
        return Err(FitError::InvalidOptions(format!(
            "eta_sqz_tilde must be in (0, 1], got {}",
            eta_sqz_tilde.value
        )));
    }
    let value = product.value / eta_sqz_tilde.value;
    let sigma = ((product.sigma / eta_sqz_tilde.value).powi(2)
        + (product.value * eta_sqz_tilde.sigma / (eta_sqz_tilde.value * eta_sqz_tilde.value))
            .powi(2))
    .sqrt();
    if value > 1.0 + 3.0 * sigma {
        return Err(FitError::UnphysicalEfficiency { value, sigma });
    }
    Ok(Estimate::new(value, sigma))
}
