//! Factor-solution comparison: Tucker congruence coefficients and loading
//! differences between two fits of the same model.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::cfa::{CfaFit, CfaModelSpec};

/// Errors from congruence computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CongruenceError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero loading vector: {0}")]
    ZeroVector(String),
    #[error("shape error: {0}")]
    Shape(String),
}

impl CongruenceError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            CongruenceError::LengthMismatch { .. } => "LengthMismatchError",
            CongruenceError::ZeroVector(_) => "ZeroVectorError",
            CongruenceError::Shape(_) => "ShapeError",
        }
    }
}

/// Tucker congruence coefficient between two loading vectors:
/// sum(a_i b_i) / sqrt(sum(a_i^2) sum(b_i^2)).
///
/// The sums are uncentered and no sign alignment is applied, so two
/// solutions that differ only by a reflected factor report a strongly
/// negative coefficient rather than a disguised positive one.
pub fn tcc(a: &[f64], b: &[f64]) -> Result<f64, CongruenceError> {
    if a.len() != b.len() {
        return Err(CongruenceError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(CongruenceError::ZeroVector("empty loading vector".into()));
    }
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 {
        return Err(CongruenceError::ZeroVector("first vector is all zero".into()));
    }
    if bb == 0.0 {
        return Err(CongruenceError::ZeroVector("second vector is all zero".into()));
    }
    Ok(ab / (aa * bb).sqrt())
}

/// Qualitative congruence band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Band {
    Good,
    Fair,
    Low,
}

impl Band {
    pub fn label(&self) -> &'static str {
        match self {
            Band::Good => "Good",
            Band::Fair => "Fair",
            Band::Low => "Low",
        }
    }
}

/// Bands a congruence coefficient: Good at 0.95 and above, Fair at 0.85 and
/// above, Low otherwise. Applied to the signed coefficient, so a reflected
/// factor lands in Low.
pub fn band_tcc(phi: f64) -> Band {
    if phi >= 0.95 {
        Band::Good
    } else if phi >= 0.85 {
        Band::Fair
    } else {
        Band::Low
    }
}

/// Per-factor mean absolute difference between two standardized pattern
/// matrices, averaged over the cells where the model pattern is active.
pub fn loading_mae(
    model: &CfaModelSpec,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<f64>, CongruenceError> {
    let p = model.n_indicators();
    let m = model.n_factors();
    for (label, grid) in [("first", a), ("second", b)] {
        if grid.nrows() != p || grid.ncols() != m {
            return Err(CongruenceError::Shape(format!(
                "{label} loading matrix is {}x{}, model expects {p}x{m}",
                grid.nrows(),
                grid.ncols()
            )));
        }
    }
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..p {
            if model.pattern(i, j) {
                total += (a[(i, j)] - b[(i, j)]).abs();
                count += 1;
            }
        }
        out.push(total / count as f64);
    }
    Ok(out)
}

/// Congruence summary for one factor of a model fitted to two samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorCongruence {
    pub factor: String,
    pub tcc: f64,
    pub loading_mae: f64,
    pub band: Band,
}

/// Factor-by-factor congruence between two fits of the same model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongruenceReport {
    pub factors: Vec<FactorCongruence>,
}

/// Compares two fits of the same model specification factor by factor,
/// using the standardized loadings restricted to each factor's pattern.
pub fn congruence_report(
    reference: &CfaFit,
    simulated: &CfaFit,
) -> Result<CongruenceReport, CongruenceError> {
    let model = &reference.model;
    if simulated.model != *model {
        return Err(CongruenceError::Shape(
            "fits use different model specifications".into(),
        ));
    }
    let maes = loading_mae(model, &reference.loadings_std, &simulated.loadings_std)?;
    let mut factors = Vec::with_capacity(model.n_factors());
    for j in 0..model.n_factors() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..model.n_indicators() {
            if model.pattern(i, j) {
                a.push(reference.loadings_std[(i, j)]);
                b.push(simulated.loadings_std[(i, j)]);
            }
        }
        let phi = tcc(&a, &b)?;
        factors.push(FactorCongruence {
            factor: model.factor_names()[j].clone(),
            tcc: phi,
            loading_mae: maes[j],
            band: band_tcc(phi),
        });
    }
    Ok(CongruenceReport { factors })
}
