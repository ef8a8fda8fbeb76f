//! Two-component principal-component projection for comparing score clouds.
//!
//! The basis is always fitted on the reference (human) sample's covariance
//! and both samples are projected through it, so displacement of the
//! simulated cloud is measured in the human sample's coordinate system.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Errors from basis fitting and projection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcaError {
    #[error("need at least {required} rows, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("covariance rank below two: {0}")]
    Rank(String),
    #[error("shape error: {0}")]
    Shape(String),
}

impl PcaError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            PcaError::InsufficientData { .. } => "InsufficientDataError",
            PcaError::Rank(_) => "RankError",
            PcaError::Shape(_) => "ShapeError",
        }
    }
}

/// A fitted two-component basis: the fitting sample's column means and the
/// top two eigenvectors of its covariance matrix (unit length, rows of
/// `components`), with their eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub means: DVector<f64>,
    pub components: DMatrix<f64>,
    pub eigenvalues: [f64; 2],
}

/// Projected coordinates, one (dim1, dim2) row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: DMatrix<f64>,
}

const RANK_RTOL: f64 = 1e-13;

/// Fits a two-component basis to a subjects x variables score grid.
///
/// Works on the covariance of the raw scores (no rescaling), so variables
/// are expected to share a measurement unit, as Likert scores at one
/// aggregation level do. Component signs are fixed by making each
/// component's largest-magnitude entry positive (first such entry on ties).
pub fn fit_pca2(scores: &DMatrix<f64>) -> Result<PcaBasis, PcaError> {
    let n = scores.nrows();
    let p = scores.ncols();
    if n < 3 {
        return Err(PcaError::InsufficientData { required: 3, actual: n });
    }
    if p < 2 {
        return Err(PcaError::Shape(format!("need at least 2 variables, got {p}")));
    }
    let nf = n as f64;
    let means = DVector::from_iterator(p, (0..p).map(|j| scores.column(j).sum() / nf));
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (scores[(r, i)] - means[i]) * (scores[(r, j)] - means[j]);
            }
            let v = acc / (nf - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a real symmetric matrix are finite")
    });
    let top = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]];
    if top[0] <= 0.0 || top[1] <= RANK_RTOL * top[0] {
        return Err(PcaError::Rank(format!(
            "leading eigenvalues {} and {}",
            top[0], top[1]
        )));
    }

    let mut components = DMatrix::zeros(2, p);
    for (row, &col) in order[..2].iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        let lead = (0..p)
            .max_by(|&a, &b| {
                v[a].abs()
                    .partial_cmp(&v[b].abs())
                    .expect("eigenvector entries are finite")
            })
            .unwrap();
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components[(row, j)] = sign * v[j];
        }
    }
    Ok(PcaBasis {
        means,
        components,
        eigenvalues: top,
    })
}

/// Projects a score grid through a fitted basis: coordinates are
/// (X - means) * components^T. The grid must have the basis's variable
/// count; any sample can be projected, not just the fitting one.
pub fn project(basis: &PcaBasis, scores: &DMatrix<f64>) -> Result<Projection, PcaError> {
    let p = basis.means.len();
    if scores.ncols() != p {
        return Err(PcaError::Shape(format!(
            "scores have {} variables, basis expects {p}",
            scores.ncols()
        )));
    }
    let n = scores.nrows();
    let mut centered = scores.clone();
    for j in 0..p {
        for i in 0..n {
            centered[(i, j)] -= basis.means[j];
        }
    }
    Ok(Projection {
        coords: centered * basis.components.transpose(),
    })
}
