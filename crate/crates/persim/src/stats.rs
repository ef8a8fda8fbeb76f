//! Descriptive and comparative statistics shared across the pipeline.
//!
//! All formulas operate on complete vectors; missing-data handling happens
//! upstream during scoring. Dispersion uses the sample denominator (n - 1)
//! while the shape moments (skewness, excess kurtosis) use biased central
//! moments with denominator n, matching the conventions of the reports this
//! library reproduces.

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors produced by the statistics layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("shape error: {0}")]
    Shape(String),
}

impl StatsError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            StatsError::InsufficientData { .. } => "InsufficientDataError",
            StatsError::LengthMismatch { .. } => "LengthMismatchError",
            StatsError::DegenerateInput(_) => "DegenerateInputError",
            StatsError::Shape(_) => "ShapeError",
        }
    }
}

/// Moment-based summary of a single variable.
///
/// `skewness` and `excess_kurtosis` are `None` when the variable has zero
/// variance, where both shape moments are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveSummary {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

fn require_finite(values: &[f64]) -> Result<(), StatsError> {
    if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput(format!(
            "non-finite value at index {idx}"
        )));
    }
    Ok(())
}

/// Computes mean, sample standard deviation, skewness, and excess kurtosis.
///
/// Standard deviation uses denominator n - 1; skewness is m3 / m2^1.5 and
/// excess kurtosis is m4 / m2^2 - 3 with biased central moments (denominator
/// n). Requires at least two observations.
pub fn describe(values: &[f64]) -> Result<DescriptiveSummary, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    require_finite(values)?;
    let nf = n as f64;
    let mu = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    let mut ss = 0.0;
    for &v in values {
        let d = v - mu;
        let d2 = d * d;
        ss += d2;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sigma = (ss / (nf - 1.0)).sqrt();
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };
    Ok(DescriptiveSummary {
        n,
        mu,
        sigma,
        skewness,
        excess_kurtosis,
    })
}

fn check_pair(x: &[f64], y: &[f64], min_n: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min_n {
        return Err(StatsError::InsufficientData {
            required: min_n,
            actual: x.len(),
        });
    }
    require_finite(x)?;
    require_finite(y)
}

/// Pearson product-moment correlation between two equal-length vectors.
///
/// Fails with [`StatsError::DegenerateInput`] when either vector is constant.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput(
            "first vector is constant".into(),
        ));
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateInput(
            "second vector is constant".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Mean absolute error between paired vectors.
pub fn mae(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 1)?;
    let total: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / x.len() as f64)
}

/// Heterogeneity alignment index: the Pearson correlation between the
/// per-unit standard-deviation profile of a reference sample and that of a
/// simulated sample. Delegates to [`pearson_r`] so the two metrics can never
/// drift apart.
pub fn hai(sigma_reference: &[f64], sigma_simulated: &[f64]) -> Result<f64, StatsError> {
    pearson_r(sigma_reference, sigma_simulated)
}

/// Cronbach's alpha for a subjects x items score grid.
///
/// alpha = k / (k - 1) * (1 - sum(item variances) / variance(row totals)),
/// with all variances on the sample (n - 1) denominator.
pub fn cronbach_alpha(grid: &DMatrix<f64>) -> Result<f64, StatsError> {
    let n = grid.nrows();
    let k = grid.ncols();
    if k < 2 {
        return Err(StatsError::InsufficientData {
            required: 2,
            actual: k,
        });
    }
    if n < 2 {
        return Err(StatsError::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    require_finite(grid.as_slice())?;
    let nf = n as f64;
    let mut item_var_sum = 0.0;
    for j in 0..k {
        let col = grid.column(j);
        let mean = col.sum() / nf;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        item_var_sum += ss / (nf - 1.0);
    }
    let totals: Vec<f64> = (0..n).map(|i| grid.row(i).sum()).collect();
    let tmean = totals.iter().sum::<f64>() / nf;
    let tvar = totals.iter().map(|t| (t - tmean) * (t - tmean)).sum::<f64>() / (nf - 1.0);
    if tvar == 0.0 {
        return Err(StatsError::DegenerateInput(
            "row totals have zero variance".into(),
        ));
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - item_var_sum / tvar))
}

/// Coefficient of determination from the least-squares regression of
/// `observed` on `predictor` (slope and intercept both free).
///
/// R^2 = 1 - SS_res / SS_tot. Requires at least three pairs and non-constant
/// vectors on both sides.
pub fn r_squared(predictor: &[f64], observed: &[f64]) -> Result<f64, StatsError> {
    check_pair(predictor, observed, 3)?;
    let n = predictor.len() as f64;
    let mx = predictor.iter().sum::<f64>() / n;
    let my = observed.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in predictor.iter().zip(observed) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput("predictor is constant".into()));
    }
    let mut ss_tot = 0.0;
    for &yi in observed {
        ss_tot += (yi - my) * (yi - my);
    }
    if ss_tot == 0.0 {
        return Err(StatsError::DegenerateInput(
            "observed vector is constant".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    for (&xi, &yi) in predictor.iter().zip(observed) {
        let fit = intercept + slope * xi;
        ss_res += (yi - fit) * (yi - fit);
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Pairwise Pearson correlation matrix of the columns of a score grid.
///
/// The diagonal is exactly 1.0 and the result is symmetric by construction
/// (each pair is computed once). Every column must be non-constant.
pub fn correlation_matrix(grid: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
    let n = grid.nrows();
    let m = grid.ncols();
    if n < 3 {
        return Err(StatsError::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    let cols: Vec<Vec<f64>> = (0..m).map(|j| grid.column(j).iter().copied().collect()).collect();
    for (j, col) in cols.iter().enumerate() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(StatsError::DegenerateInput(format!(
                "column {j} is constant"
            )));
        }
    }
    let mut out = DMatrix::identity(m, m);
    for j in 0..m {
        for k in (j + 1)..m {
            let r = pearson_r(&cols[j], &cols[k])?;
            out[(j, k)] = r;
            out[(k, j)] = r;
        }
    }
    Ok(out)
}

/// Mean absolute off-diagonal correlation, the summary used for discriminant
/// validity. Averages |r| over the strict upper triangle of a correlation
/// matrix.
pub fn discriminant_mean_abs(corr: &DMatrix<f64>) -> Result<f64, StatsError> {
    let m = corr.nrows();
    if corr.ncols() != m {
        return Err(StatsError::Shape(format!(
            "matrix is {}x{}, expected square",
            m,
            corr.ncols()
        )));
    }
    if m < 2 {
        return Err(StatsError::Shape(
            "need at least a 2x2 correlation matrix".into(),
        ));
    }
    for i in 0..m {
        if (corr[(i, i)] - 1.0).abs() > 1e-8 {
            return Err(StatsError::Shape(format!(
                "diagonal entry {i} is {}, expected 1",
                corr[(i, i)]
            )));
        }
        for j in (i + 1)..m {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-8 {
                return Err(StatsError::Shape(format!(
                    "asymmetric entries at ({i}, {j})"
                )));
            }
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            total += corr[(i, j)].abs();
            count += 1;
        }
    }
    Ok(total / count as f64)
}
