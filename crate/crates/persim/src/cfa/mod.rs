//! Maximum-likelihood confirmatory factor analysis for simple-structure
//! models, with the fit indices used to compare samples.
//!
//! A model assigns each indicator to exactly one factor. Factor variances
//! are fixed to one for identification, factor correlations are free (and
//! deliberately unconstrained, so inadmissible solutions surface as warnings
//! rather than being hidden by bounds), and error variances are optimized on
//! the log scale to stay positive. The discrepancy function is
//!
//! ```text
//! F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p
//! ```
//!
//! minimized by BFGS with analytic gradients. Chi-square is (N - 1) * F.

pub mod optim;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

pub use optim::StopRules;

use crate::scale::{DomainDef, ScaleSpec};

/// Errors from model construction, covariance preparation, and fitting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfaError {
    #[error("model specification error: {0}")]
    Spec(String),
    #[error("covariance matrix is not positive definite: {0}")]
    Pd(String),
    #[error("need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CfaError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            CfaError::Spec(_) => "SpecError",
            CfaError::Pd(_) => "PdError",
            CfaError::InsufficientData { .. } => "InsufficientDataError",
            CfaError::Argument(_) => "ArgumentError",
            CfaError::Numerical(_) => "NumericalError",
        }
    }
}

/// Conditions worth reporting alongside a completed fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaWarning {
    /// The factor correlation matrix is not positive definite (for example a
    /// correlation beyond +/-1), an inadmissible but informative solution.
    NonPositiveDefinitePhi,
    /// A standardized error variance collapsed to (near) zero, a Heywood
    /// boundary case.
    BoundaryErrorVariance,
    /// The optimizer stopped without meeting its convergence rules.
    NotConverged,
}

impl CfaWarning {
    pub fn label(&self) -> &'static str {
        match self {
            CfaWarning::NonPositiveDefinitePhi => "NonPositiveDefinitePhi",
            CfaWarning::BoundaryErrorVariance => "BoundaryErrorVariance",
            CfaWarning::NotConverged => "NotConverged",
        }
    }
}

/// A simple-structure measurement model: each indicator loads on exactly one
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CfaModelSpec {
    indicator_names: Vec<String>,
    factor_names: Vec<String>,
    /// Factor index for each indicator.
    factor_of: Vec<usize>,
    free_factor_correlations: bool,
}

impl CfaModelSpec {
    /// Builds a model from indicator-to-factor assignments.
    ///
    /// Requires every factor to have at least two indicators, or three when
    /// the model has a single factor, so the model is identified.
    pub fn new(
        indicator_names: Vec<String>,
        factor_names: Vec<String>,
        factor_of: Vec<usize>,
        free_factor_correlations: bool,
    ) -> Result<Self, CfaError> {
        let p = indicator_names.len();
        let m = factor_names.len();
        if p == 0 || m == 0 {
            return Err(CfaError::Spec("model needs indicators and factors".into()));
        }
        if factor_of.len() != p {
            return Err(CfaError::Spec(format!(
                "{} assignments for {} indicators",
                factor_of.len(),
                p
            )));
        }
        let mut counts = vec![0usize; m];
        for (i, &f) in factor_of.iter().enumerate() {
            if f >= m {
                return Err(CfaError::Spec(format!(
                    "indicator {i} assigned to unknown factor index {f}"
                )));
            }
            counts[f] += 1;
        }
        let minimum = if m == 1 { 3 } else { 2 };
        for (f, &count) in counts.iter().enumerate() {
            if count < minimum {
                return Err(CfaError::Spec(format!(
                    "factor {:?} has {count} indicators, needs at least {minimum}",
                    factor_names[f]
                )));
            }
        }
        Ok(CfaModelSpec {
            indicator_names,
            factor_names,
            factor_of,
            free_factor_correlations,
        })
    }

    pub fn n_indicators(&self) -> usize {
        self.indicator_names.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_names.len()
    }

    pub fn indicator_names(&self) -> &[String] {
        &self.indicator_names
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    pub fn factor_of(&self, indicator: usize) -> usize {
        self.factor_of[indicator]
    }

    /// Whether `indicator` loads on `factor` in the pattern matrix.
    pub fn pattern(&self, indicator: usize, factor: usize) -> bool {
        self.factor_of[indicator] == factor
    }

    /// Count of free parameters: one loading per indicator, one error
    /// variance per indicator, and the free factor correlations.
    pub fn free_parameters(&self) -> usize {
        let p = self.n_indicators();
        let m = self.n_factors();
        let phi = if self.free_factor_correlations {
            m * (m - 1) / 2
        } else {
            0
        };
        2 * p + phi
    }

    /// Model degrees of freedom against a p x p covariance matrix.
    pub fn degrees_of_freedom(&self) -> Result<usize, CfaError> {
        let p = self.n_indicators();
        let moments = p * (p + 1) / 2;
        let q = self.free_parameters();
        if q > moments {
            return Err(CfaError::Spec(format!(
                "{q} free parameters exceed {moments} covariance moments"
            )));
        }
        Ok(moments - q)
    }
}

/// Three-facet model for one domain: the domain's items are indicators and
/// its facets are correlated factors.
pub fn build_tfm_spec(domain: &DomainDef, scale: &ScaleSpec) -> Result<CfaModelSpec, CfaError> {
    let mut indicator_names = Vec::new();
    let mut factor_of = Vec::new();
    for &id in &domain.item_ids {
        let facet_pos = domain
            .facet_names
            .iter()
            .position(|name| {
                scale
                    .facet(name)
                    .map(|f| f.item_ids.contains(&id))
                    .unwrap_or(false)
            })
            .ok_or_else(|| {
                CfaError::Spec(format!("item {id} not covered by the domain's facets"))
            })?;
        indicator_names.push(format!("Item{id}"));
        factor_of.push(facet_pos);
    }
    CfaModelSpec::new(indicator_names, domain.facet_names.clone(), factor_of, true)
}

/// Five-factor model over the whole scale: facet scores are indicators and
/// domains are correlated factors.
pub fn build_ffm_spec(scale: &ScaleSpec) -> Result<CfaModelSpec, CfaError> {
    let factor_names: Vec<String> = scale.domains.iter().map(|d| d.name.clone()).collect();
    let mut indicator_names = Vec::new();
    let mut factor_of = Vec::new();
    for facet in &scale.facets {
        let owner = scale
            .domains
            .iter()
            .position(|d| d.facet_names.contains(&facet.name))
            .ok_or_else(|| CfaError::Spec(format!("facet {:?} has no domain", facet.name)))?;
        indicator_names.push(facet.name.clone());
        factor_of.push(owner);
    }
    CfaModelSpec::new(indicator_names, factor_names, factor_of, true)
}

/// A sample covariance matrix with its sample size and variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceInput {
    s: DMatrix<f64>,
    n: usize,
    names: Vec<String>,
}

impl CovarianceInput {
    pub fn new(s: DMatrix<f64>, n: usize, names: Vec<String>) -> Result<Self, CfaError> {
        let p = s.nrows();
        if s.ncols() != p {
            return Err(CfaError::Argument(format!(
                "covariance matrix is {}x{}",
                p,
                s.ncols()
            )));
        }
        if names.len() != p {
            return Err(CfaError::Argument(format!(
                "{} names for {p} variables",
                names.len()
            )));
        }
        if n < 2 {
            return Err(CfaError::InsufficientData { required: 2, actual: n });
        }
        for i in 0..p {
            if s[(i, i)] <= 0.0 {
                return Err(CfaError::Argument(format!(
                    "variable {:?} has non-positive variance",
                    names[i]
                )));
            }
            for j in (i + 1)..p {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-9 * s[(i, i)].max(s[(j, j)]) {
                    return Err(CfaError::Argument(format!(
                        "covariance matrix asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CovarianceInput { s, n, names })
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn p(&self) -> usize {
        self.s.nrows()
    }

    /// True when the sample size does not exceed the variable count, where
    /// maximum-likelihood fit statistics are unreliable.
    pub fn is_small_sample(&self) -> bool {
        self.n <= self.p()
    }
}

/// Sample covariance (denominator n - 1) of the columns of a score grid.
pub fn sample_covariance(
    grid: &DMatrix<f64>,
    names: Vec<String>,
) -> Result<CovarianceInput, CfaError> {
    let n = grid.nrows();
    let p = grid.ncols();
    if n < 2 {
        return Err(CfaError::InsufficientData { required: 2, actual: n });
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| grid.column(j).sum() / nf).collect();
    let mut s = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (grid[(r, i)] - means[i]) * (grid[(r, j)] - means[j]);
            }
            let v = acc / (nf - 1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    CovarianceInput::new(s, n, names)
}

/// Optimizer settings for [`fit_ml`].
#[derive(Debug, Clone, Copy)]
pub struct CfaOptions {
    pub max_iterations: usize,
    pub f_rel_tol: f64,
    pub grad_tol: f64,
}

impl Default for CfaOptions {
    fn default() -> Self {
        CfaOptions {
            max_iterations: 500,
            f_rel_tol: 1e-9,
            grad_tol: 1e-6,
        }
    }
}

/// Incremental and absolute fit indices. `None` marks an index that is
/// undefined for the model (for example RMSEA and TLI of a saturated model
/// with zero degrees of freedom).
#[derive(Debug, Clone, PartialEq)]
pub struct FitIndices {
    pub cfi: Option<f64>,
    pub tli: Option<f64>,
    pub rmsea: Option<f64>,
    pub srmr: f64,
}

/// A completed maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct CfaFit {
    pub model: CfaModelSpec,
    /// Unstandardized loadings, one per indicator (simple structure).
    pub lambda: Vec<f64>,
    /// Standardized pattern matrix, p x m, zero outside the pattern.
    pub loadings_std: DMatrix<f64>,
    /// Factor correlation matrix with unit diagonal.
    pub phi: DMatrix<f64>,
    /// Unstandardized error variances.
    pub theta: Vec<f64>,
    /// Error variances in the standardized metric.
    pub error_var_std: Vec<f64>,
    /// Model-implied covariance matrix.
    pub sigma_hat: DMatrix<f64>,
    pub f_ml: f64,
    pub chi2: f64,
    pub df: usize,
    pub chi2_null: f64,
    pub df_null: usize,
    pub indices: FitIndices,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<CfaWarning>,
}

struct Packing {
    p: usize,
    m: usize,
    free_phi: bool,
}

impl Packing {
    fn len(&self) -> usize {
        2 * self.p + if self.free_phi { self.m * (self.m - 1) / 2 } else { 0 }
    }

    fn unpack(&self, x: &DVector<f64>) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let lambda: Vec<f64> = (0..self.p).map(|i| x[i]).collect();
        let mut phi = DMatrix::identity(self.m, self.m);
        let mut idx = self.p;
        if self.free_phi {
            for j in 0..self.m {
                for k in (j + 1)..self.m {
                    phi[(j, k)] = x[idx];
                    phi[(k, j)] = x[idx];
                    idx += 1;
                }
            }
        }
        let theta: Vec<f64> = (0..self.p).map(|i| x[idx + i].exp()).collect();
        (lambda, phi, theta)
    }
}

/// Model-implied covariance Lambda Phi Lambda^T + Theta for a
/// simple-structure model.
pub fn implied_sigma(
    model: &CfaModelSpec,
    lambda: &[f64],
    phi: &DMatrix<f64>,
    theta: &[f64],
) -> DMatrix<f64> {
    let p = model.n_indicators();
    let mut sigma = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = lambda[i] * lambda[j] * phi[(model.factor_of(i), model.factor_of(j))];
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
        sigma[(i, i)] += theta[i];
    }
    sigma
}

fn ln_det_from_cholesky(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0
}

/// Evaluates the ML discrepancy and its analytic gradient at a packed
/// parameter vector.
///
/// Packing order: one loading per indicator, then the free factor
/// correlations in row-major upper-triangle order (skipped when the model
/// fixes them), then one log error variance per indicator; the total length
/// is [`CfaModelSpec::free_parameters`]. Returns `None` when the implied
/// covariance at `x` is not positive definite. This is the exact objective
/// the fitter minimizes, exposed for diagnostics and gradient verification.
pub fn ml_value_and_gradient(
    model: &CfaModelSpec,
    cov: &CovarianceInput,
    x: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let p = model.n_indicators();
    let m = model.n_factors();
    let packing = Packing {
        p,
        m,
        free_phi: m > 1 && model.free_factor_correlations,
    };
    debug_assert_eq!(x.len(), packing.len());
    let s = cov.s();
    let s_chol = Cholesky::new(s.clone())?;
    let ln_det_s = ln_det_from_cholesky(&s_chol);

    let (lambda, phi, theta) = packing.unpack(x);
    let sigma = implied_sigma(model, &lambda, &phi, &theta);
    let chol = Cholesky::new(sigma)?;
    let ln_det_sigma = ln_det_from_cholesky(&chol);
    let sigma_inv = chol.inverse();
    let f = ln_det_sigma + (s * &sigma_inv).trace() - ln_det_s - p as f64;
    if !f.is_finite() {
        return None;
    }
    // G = Sigma^-1 (Sigma - S) Sigma^-1, the gradient of F in Sigma.
    let g = &sigma_inv - &sigma_inv * s * &sigma_inv;
    let mut grad = DVector::zeros(packing.len());
    for i in 0..p {
        // dF/dlambda_i = 2 [G Lambda Phi]_{i, f(i)}.
        let fi = model.factor_of(i);
        let mut acc = 0.0;
        for j in 0..p {
            acc += g[(i, j)] * lambda[j] * phi[(model.factor_of(j), fi)];
        }
        grad[i] = 2.0 * acc;
    }
    let mut idx = p;
    if packing.free_phi {
        // dF/dphi_{jk} = 2 [Lambda^T G Lambda]_{jk} for j < k.
        for j in 0..m {
            for k in (j + 1)..m {
                let mut acc = 0.0;
                for a in 0..p {
                    if model.factor_of(a) != j {
                        continue;
                    }
                    for b in 0..p {
                        if model.factor_of(b) == k {
                            acc += lambda[a] * g[(a, b)] * lambda[b];
                        }
                    }
                }
                grad[idx] = 2.0 * acc;
                idx += 1;
            }
        }
    }
    for i in 0..p {
        // Chain rule through theta_i = exp(u_i).
        grad[idx + i] = g[(i, i)] * theta[i];
    }
    Some((f, grad))
}

/// Fits the model to a covariance input by maximum likelihood.
///
/// Returns a completed fit even when the optimizer stops early (flagged with
/// [`CfaWarning::NotConverged`]); hard errors are reserved for invalid
/// inputs such as a non-positive-definite sample covariance or mismatched
/// variable names.
pub fn fit_ml(
    cov: &CovarianceInput,
    model: &CfaModelSpec,
    options: &CfaOptions,
) -> Result<CfaFit, CfaError> {
    let p = model.n_indicators();
    let m = model.n_factors();
    if cov.p() != p {
        return Err(CfaError::Argument(format!(
            "model has {p} indicators but covariance has {} variables",
            cov.p()
        )));
    }
    if cov.names() != model.indicator_names() {
        return Err(CfaError::Argument(
            "covariance variable names do not match model indicators".into(),
        ));
    }
    let df = model.degrees_of_freedom()?;
    let s = cov.s();
    if Cholesky::new(s.clone()).is_none() {
        return Err(CfaError::Pd(
            "sample covariance failed Cholesky factorization".into(),
        ));
    }

    let packing = Packing {
        p,
        m,
        // Single-factor models have no correlations to free.
        free_phi: m > 1 && model.free_factor_correlations,
    };
    let mut x0 = DVector::zeros(packing.len());
    for i in 0..p {
        x0[i] = 0.7 * s[(i, i)].sqrt();
    }
    let mut idx = p;
    if packing.free_phi {
        for _ in 0..(m * (m - 1) / 2) {
            x0[idx] = 0.3;
            idx += 1;
        }
    }
    for i in 0..p {
        x0[idx + i] = (0.5 * s[(i, i)]).ln();
    }

    let objective = |x: &DVector<f64>| ml_value_and_gradient(model, cov, x);

    let rules = StopRules {
        max_iterations: options.max_iterations,
        f_rel_tol: options.f_rel_tol,
        grad_tol: options.grad_tol,
    };
    let result = optim::minimize(objective, x0, &rules);
    if !result.f.is_finite() {
        return Err(CfaError::Numerical(
            "optimizer could not evaluate the start point".into(),
        ));
    }

    let (lambda, phi, theta) = packing.unpack(&result.x);
    let sigma_hat = implied_sigma(model, &lambda, &phi, &theta);
    let (loadings_std, error_var_std) = standardize_solution(model, &lambda, &phi, &theta, &sigma_hat)?;

    let mut warnings = Vec::new();
    if !result.converged {
        warnings.push(CfaWarning::NotConverged);
    }
    if m > 1 && Cholesky::new(phi.clone()).is_none() {
        warnings.push(CfaWarning::NonPositiveDefinitePhi);
    }
    if error_var_std.iter().any(|&t| t < 1e-4) {
        warnings.push(CfaWarning::BoundaryErrorVariance);
    }

    let n = cov.n();
    let nf = (n - 1) as f64;
    let chi2 = nf * result.f;
    let (f_null, df_null) = null_model_fit(cov)?;
    let chi2_null = nf * f_null;
    let indices = fit_indices(chi2, df, chi2_null, df_null, n, s, &sigma_hat)?;

    Ok(CfaFit {
        model: model.clone(),
        lambda,
        loadings_std,
        phi,
        theta,
        error_var_std,
        sigma_hat,
        f_ml: result.f,
        chi2,
        df,
        chi2_null,
        df_null,
        indices,
        n,
        converged: result.converged,
        iterations: result.iterations,
        warnings,
    })
}

/// Discrepancy and degrees of freedom of the independence (null) model,
/// which constrains all covariances to zero and fits variances exactly:
/// F_null = sum(ln s_ii) - ln|S|, df_null = p(p-1)/2.
pub fn null_model_fit(cov: &CovarianceInput) -> Result<(f64, usize), CfaError> {
    let s = cov.s();
    let p = cov.p();
    let chol = Cholesky::new(s.clone())
        .ok_or_else(|| CfaError::Pd("sample covariance failed Cholesky factorization".into()))?;
    let ln_det_s = ln_det_from_cholesky(&chol);
    let sum_ln_diag: f64 = (0..p).map(|i| s[(i, i)].ln()).sum();
    Ok((sum_ln_diag - ln_det_s, p * (p - 1) / 2))
}

/// Computes CFI, TLI, RMSEA, and SRMR.
///
/// * CFI = 1 - max(chi2 - df, 0) / max(chi2_null - df_null, 0)
/// * TLI = (chi2_null/df_null - chi2/df) / (chi2_null/df_null - 1)
/// * RMSEA = sqrt(max((chi2 - df) / (df (N - 1)), 0))
/// * SRMR: root mean square of residuals between S and Sigma-hat after both
///   are rescaled to the correlation metric by the observed standard
///   deviations, averaged over the p(p+1)/2 lower-triangle cells including
///   the diagonal.
///
/// TLI and RMSEA are `None` when df = 0; CFI is `None` when the null model
/// fits perfectly while the target model does not.
pub fn fit_indices(
    chi2: f64,
    df: usize,
    chi2_null: f64,
    df_null: usize,
    n: usize,
    s: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
) -> Result<FitIndices, CfaError> {
    if df_null == 0 {
        return Err(CfaError::Argument("null model has zero degrees of freedom".into()));
    }
    if n < 2 {
        return Err(CfaError::InsufficientData { required: 2, actual: n });
    }
    let p = s.nrows();
    if s.ncols() != p || sigma_hat.nrows() != p || sigma_hat.ncols() != p {
        return Err(CfaError::Argument("S and Sigma-hat must be square and conformable".into()));
    }

    let excess = (chi2 - df as f64).max(0.0);
    let excess_null = (chi2_null - df_null as f64).max(0.0);
    let cfi = if excess_null > 0.0 {
        Some(1.0 - excess / excess_null)
    } else if excess == 0.0 {
        Some(1.0)
    } else {
        None
    };

    let tli = if df == 0 {
        None
    } else {
        let null_ratio = chi2_null / df_null as f64;
        let denominator = null_ratio - 1.0;
        if denominator == 0.0 {
            None
        } else {
            Some((null_ratio - chi2 / df as f64) / denominator)
        }
    };

    let rmsea = if df == 0 {
        None
    } else {
        Some(((chi2 - df as f64) / (df as f64 * (n - 1) as f64)).max(0.0).sqrt())
    };

    let mut acc = 0.0;
    for i in 0..p {
        let sd_i = s[(i, i)].sqrt();
        for j in 0..=i {
            let sd_j = s[(j, j)].sqrt();
            let observed = s[(i, j)] / (sd_i * sd_j);
            let implied = sigma_hat[(i, j)] / (sd_i * sd_j);
            acc += (observed - implied) * (observed - implied);
        }
    }
    let srmr = (acc / (p * (p + 1) / 2) as f64).sqrt();

    Ok(FitIndices { cfi, tli, rmsea, srmr })
}

/// Rescales a solution to the standardized metric: each loading is divided
/// by the implied standard deviation of its indicator (and multiplied by the
/// factor standard deviation, which is one here), each error variance by the
/// implied variance.
pub fn standardize_solution(
    model: &CfaModelSpec,
    lambda: &[f64],
    phi: &DMatrix<f64>,
    theta: &[f64],
    sigma_hat: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>), CfaError> {
    let p = model.n_indicators();
    let m = model.n_factors();
    let mut loadings = DMatrix::zeros(p, m);
    let mut error_var = vec![0.0; p];
    for i in 0..p {
        let implied = sigma_hat[(i, i)];
        if implied <= 0.0 || !implied.is_finite() {
            return Err(CfaError::Numerical(format!(
                "implied variance of indicator {i} is not positive"
            )));
        }
        let f = model.factor_of(i);
        loadings[(i, f)] = lambda[i] * phi[(f, f)].sqrt() / implied.sqrt();
        error_var[i] = theta[i] / implied;
    }
    Ok((loadings, error_var))
}
