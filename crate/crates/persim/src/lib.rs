//! Scoring, reliability, factor analysis, and simulation-fidelity metrics
//! for hierarchical Likert personality scales.
//!
//! The library covers the full evaluation pipeline for comparing a simulated
//! response sample against a human reference sample on the same instrument:
//!
//! * [`scale`]: scale definitions, reverse coding, facet/domain scoring,
//!   including the bundled BFI-2 instrument.
//! * [`stats`]: descriptives, reliability, correlation, and alignment
//!   metrics.
//! * [`cfa`]: maximum-likelihood confirmatory factor analysis with fit
//!   indices.
//! * [`congruence`]: Tucker congruence and loading comparisons between two
//!   fitted factor solutions.
//! * [`pca`]: two-component principal-component projections for visual
//!   comparison.
//! * [`sim`]: prompt construction from subject profiles, pluggable response
//!   backends, and batch simulation.
//! * [`criterion`]: behavioral criterion scoring, domain-criterion
//!   correlations, and leave-one-question-out ablation.
//! * [`report`]: the comparison report assembly and deterministic emission.
//! * [`io`]: CSV ingestion for responses, profiles, and criterion data.

pub mod cfa;
pub mod congruence;
pub mod criterion;
pub mod io;
pub mod pca;
pub mod report;
pub mod scale;
pub mod sim;
pub mod stats;

pub use report::PipelineError;

/// Re-exported so downstream crates can name the matrix types used in this
/// crate's public signatures without pinning their own nalgebra version.
pub use nalgebra;
