//! Comparison-report assembly and emission.
//!
//! [`compare_samples`] scores a reference and a simulated response matrix,
//! then lines the two samples up on every metric the toolkit computes:
//! descriptives with heterogeneity alignment, reliability, factor structure
//! with congruence, discriminant correlations, paired per-subject
//! similarity, optional criterion and ablation blocks, and two-component
//! projections. [`emit_report`] writes the result as canonical JSON (sorted
//! keys, floats at six significant digits) plus per-block CSV tables, so
//! identical inputs always produce byte-identical artifacts.
//!
//! Localized failures (a non-convergent factor model, a zero-variance
//! column) never abort the report; the affected cells carry an
//! `undefined:<reason>` tag and the metadata records a warning.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cfa::{
    build_ffm_spec, build_tfm_spec, fit_ml, sample_covariance, CfaError, CfaFit, CfaModelSpec,
    CfaOptions,
};
use crate::congruence::{congruence_report, CongruenceError};
use crate::criterion::{
    criterion_correlations, report_domain_order, score_criterion, AblationResult, CriterionError,
    CriterionSpec,
};
use crate::io::IngestError;
use crate::pca::{fit_pca2, project, PcaError};
use crate::scale::{
    apply_reverse_coding, score, Coding, Level, MissingPolicy, ResponseMatrix, ScaleError,
    ScaleSpec, ScoredSample,
};
use crate::sim::SimError;
use crate::stats::{self, StatsError};

/// Top-level error for pipeline orchestration.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Cfa(#[from] CfaError),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("configuration error: {0}")]
    Config(String),
}

impl PipelineError {
    /// Stable error-kind name, printed on standard error by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            PipelineError::Scale(e) => e.name(),
            PipelineError::Stats(e) => e.name(),
            PipelineError::Cfa(e) => e.name(),
            PipelineError::Congruence(e) => e.name(),
            PipelineError::Pca(e) => e.name(),
            PipelineError::Sim(e) => e.name(),
            PipelineError::Criterion(e) => e.name(),
            PipelineError::Ingest(e) => e.name(),
            PipelineError::Io(_) => "IoError",
            PipelineError::Json(_) => "JsonError",
            PipelineError::Config(_) => "ConfigError",
        }
    }
}

/// One numeric report cell: either a finite value or a tagged reason why
/// the value does not exist. JSON form is the bare number or
/// `{"undefined": "<reason>"}`; CSV form is the number or
/// `undefined:<reason>`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Undefined(String),
}

impl Cell {
    pub fn value(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Value(v)
        } else {
            Cell::Undefined("non-finite result".into())
        }
    }

    pub fn undefined(reason: impl Into<String>) -> Cell {
        Cell::Undefined(reason.into())
    }

    pub fn from_result<E: Display>(r: Result<f64, E>) -> Cell {
        match r {
            Ok(v) => Cell::value(v),
            Err(e) => Cell::Undefined(e.to_string()),
        }
    }

    pub fn from_option(v: Option<f64>, reason: &str) -> Cell {
        match v {
            Some(v) => Cell::value(v),
            None => Cell::Undefined(reason.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            Cell::Undefined(_) => None,
        }
    }

    /// CSV rendering at six significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Value(v) => format_sig6(*v),
            Cell::Undefined(reason) => format!("undefined:{reason}"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Value(v) => serializer.serialize_f64(*v),
            Cell::Undefined(reason) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("undefined", reason)?;
                map.end()
            }
        }
    }
}

/// Rounds to six significant digits and prints the shortest decimal form
/// of the rounded value, so `51.0` renders as `51` and long fractions as
/// six digits.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return "non-finite".to_string();
    }
    format!("{}", round_sig6(v))
}

fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

fn round_json(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let v = n.as_f64().unwrap_or(f64::NAN);
                match serde_json::Number::from_f64(round_sig6(v)) {
                    Some(rounded) => Value::Number(rounded),
                    None => Value::String("non-finite".into()),
                }
            } else {
                Value::Number(n)
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect())
        }
        other => other,
    }
}

/// Serializes a report as canonical JSON: keys sorted, floats rounded to
/// six significant digits, trailing newline. Byte-identical for identical
/// reports.
pub fn report_json(report: &ComparisonReport) -> Result<String, PipelineError> {
    let value = round_json(serde_json::to_value(report)?);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub scale_name: String,
    pub scale_version: Option<String>,
    /// Computation conventions the numbers depend on.
    pub conventions: Vec<String>,
    /// Seeds involved in producing the inputs, recorded for reruns.
    pub seeds: BTreeMap<String, u64>,
    pub reference_subjects: usize,
    pub simulated_subjects: usize,
    /// Localized failures and notable conditions encountered while
    /// assembling the report.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitDescriptives {
    pub unit: String,
    pub reference_mu: Cell,
    pub reference_sigma: Cell,
    pub simulated_mu: Cell,
    pub simulated_sigma: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDescriptives {
    pub level: String,
    pub units: Vec<UnitDescriptives>,
    /// Mean absolute difference between the two samples' unit means.
    pub mu_mae: Cell,
    /// Mean absolute difference between the two samples' unit sigmas.
    pub sigma_mae: Cell,
    /// Correlation of the sigma profiles across units.
    pub hai: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub level: String,
    pub unit: String,
    pub reference: Cell,
    pub simulated: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    /// Set when the fit failed outright; every cell then carries the same
    /// reason.
    pub error: Option<String>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub n: Option<usize>,
    pub df: Option<usize>,
    pub f_ml: Cell,
    pub chi2: Cell,
    pub cfi: Cell,
    pub tli: Cell,
    pub rmsea: Cell,
    pub srmr: Cell,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorComparison {
    pub factor: String,
    pub tcc: Cell,
    pub band: Option<String>,
    pub loading_mae: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiDelta {
    pub pair: String,
    pub reference: Cell,
    pub simulated: Cell,
    pub delta: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralEntry {
    /// Domain name for the per-domain facet models, or "FFM".
    pub model: String,
    pub reference: FitSummary,
    pub simulated: FitSummary,
    pub congruence: Vec<FactorComparison>,
    pub congruence_error: Option<String>,
    pub phi_deltas: Vec<PhiDelta>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminantBlock {
    pub domains: Vec<String>,
    pub reference: Vec<Vec<Cell>>,
    pub simulated: Vec<Vec<Cell>>,
    pub reference_mean_abs: Cell,
    pub simulated_mean_abs: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainSimilarity {
    pub domain: String,
    pub mae: Cell,
    pub r: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityBlock {
    /// True when the two samples cover exactly the same subject ids, which
    /// is what per-subject MAE and r require.
    pub paired: bool,
    pub note: Option<String>,
    pub n_pairs: usize,
    pub per_domain: Vec<DomainSimilarity>,
    pub mean_r: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRow {
    pub domain: String,
    pub reference_r: Cell,
    pub simulated_r: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionBlock {
    pub name: String,
    pub reference_pairs: usize,
    pub simulated_pairs: usize,
    pub rows: Vec<CriterionRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationDomainCell {
    pub domain: String,
    pub r_squared: Cell,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub removed_question: usize,
    pub aligned_subjects: usize,
    pub cells: Vec<AblationDomainCell>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaPoint {
    pub source: String,
    pub subject_id: String,
    pub dim1: f64,
    pub dim2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaLevelBlock {
    pub level: String,
    pub eigenvalues: Option<[f64; 2]>,
    pub points: Vec<PcaPoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub descriptives: Vec<LevelDescriptives>,
    pub reliability: Vec<AlphaRow>,
    pub structural: Vec<StructuralEntry>,
    pub discriminant: DiscriminantBlock,
    pub similarity: SimilarityBlock,
    pub criteria: Vec<CriterionBlock>,
    pub ablation: Option<Vec<AblationRow>>,
    pub pca: Vec<PcaLevelBlock>,
}

/// A criterion scale and its responses, collected from the reference
/// sample's subjects and correlated against both samples' domain scores.
#[derive(Debug, Clone)]
pub struct CriterionInput {
    pub spec: CriterionSpec,
    pub responses: ResponseMatrix,
}

/// Options for [`compare_samples`].
#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub missing_policy: MissingPolicy,
    pub cfa: CfaOptions,
    /// Seeds used to produce the inputs, echoed into the report metadata.
    pub seeds: BTreeMap<String, u64>,
    pub criteria: Vec<CriterionInput>,
    /// Precomputed ablation results to embed, if any.
    pub ablation: Option<Vec<AblationResult>>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            missing_policy: MissingPolicy::ListwiseDelete,
            cfa: CfaOptions::default(),
            seeds: BTreeMap::new(),
            criteria: Vec::new(),
            ablation: None,
        }
    }
}

const CONVENTIONS: [&str; 6] = [
    "standard deviations and covariances use the n-1 denominator",
    "rmsea = sqrt(max((chi2 - df) / (df * (n - 1)), 0))",
    "srmr averages squared correlation-metric residuals, diagonal included",
    "pca centers scores and decomposes the covariance matrix; the basis is fitted on the reference sample",
    "domain scores are means over all twelve domain items",
    "criterion totals are item means",
];

fn ensure_reverse_coded(
    matrix: &ResponseMatrix,
    spec: &ScaleSpec,
) -> Result<ResponseMatrix, ScaleError> {
    match matrix.coding() {
        Coding::Raw => apply_reverse_coding(matrix, spec),
        Coding::ReverseApplied => Ok(matrix.clone()),
    }
}

fn column_vec(grid: &DMatrix<f64>, j: usize) -> Vec<f64> {
    grid.column(j).iter().copied().collect()
}

fn columns_by_label(
    grid: &DMatrix<f64>,
    labels: &[String],
    wanted: &[String],
) -> Result<DMatrix<f64>, PipelineError> {
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut out = DMatrix::zeros(grid.nrows(), wanted.len());
    for (k, label) in wanted.iter().enumerate() {
        let &j = index.get(label.as_str()).ok_or_else(|| {
            PipelineError::Config(format!("column {label} missing from scored grid"))
        })?;
        out.set_column(k, &grid.column(j));
    }
    Ok(out)
}

fn level_descriptives(
    level: Level,
    reference: &ScoredSample,
    simulated: &ScoredSample,
    warnings: &mut Vec<String>,
) -> LevelDescriptives {
    let level_name = match level {
        Level::Item => "item",
        Level::Facet => "facet",
        Level::Domain => "domain",
    };
    let labels = reference.labels(level);
    let ref_grid = reference.grid(level);
    let sim_grid = simulated.grid(level);
    let mut units = Vec::with_capacity(labels.len());
    let mut ref_mus = Vec::new();
    let mut ref_sigmas = Vec::new();
    let mut sim_mus = Vec::new();
    let mut sim_sigmas = Vec::new();
    let mut complete = true;
    for (j, unit) in labels.iter().enumerate() {
        let r = stats::describe(&column_vec(ref_grid, j));
        let s = stats::describe(&column_vec(sim_grid, j));
        match (&r, &s) {
            (Ok(r), Ok(s)) => {
                ref_mus.push(r.mu);
                ref_sigmas.push(r.sigma);
                sim_mus.push(s.mu);
                sim_sigmas.push(s.sigma);
            }
            _ => complete = false,
        }
        units.push(UnitDescriptives {
            unit: unit.clone(),
            reference_mu: Cell::from_result(r.as_ref().map(|d| d.mu).map_err(|e| e.clone())),
            reference_sigma: Cell::from_result(r.map(|d| d.sigma)),
            simulated_mu: Cell::from_result(s.as_ref().map(|d| d.mu).map_err(|e| e.clone())),
            simulated_sigma: Cell::from_result(s.map(|d| d.sigma)),
        });
    }
    let (mu_mae, sigma_mae, hai) = if complete {
        let hai = Cell::from_result(stats::hai(&ref_sigmas, &sim_sigmas));
        if let Cell::Undefined(reason) = &hai {
            warnings.push(format!("{level_name} level: hai undefined ({reason})"));
        }
        (
            Cell::from_result(stats::mae(&ref_mus, &sim_mus)),
            Cell::from_result(stats::mae(&ref_sigmas, &sim_sigmas)),
            hai,
        )
    } else {
        warnings.push(format!(
            "{level_name} level: summary metrics undefined (a unit descriptive failed)"
        ));
        let reason = "component descriptive undefined";
        (
            Cell::undefined(reason),
            Cell::undefined(reason),
            Cell::undefined(reason),
        )
    };
    LevelDescriptives {
        level: level_name.to_string(),
        units,
        mu_mae,
        sigma_mae,
        hai,
    }
}

fn alpha_cell(grid: &DMatrix<f64>, labels: &[String], wanted: &[String]) -> Cell {
    match columns_by_label(grid, labels, wanted) {
        Ok(sub) => Cell::from_result(stats::cronbach_alpha(&sub)),
        Err(e) => Cell::undefined(e.to_string()),
    }
}

fn reliability_rows(
    spec: &ScaleSpec,
    reference: &ScoredSample,
    simulated: &ScoredSample,
) -> Vec<AlphaRow> {
    let mut rows = Vec::with_capacity(spec.facets.len() + spec.domains.len());
    for facet in &spec.facets {
        let wanted: Vec<String> = facet.item_ids.iter().map(|id| format!("Item{id}")).collect();
        rows.push(AlphaRow {
            level: "facet".into(),
            unit: facet.name.clone(),
            reference: alpha_cell(&reference.item_scores, &reference.item_labels, &wanted),
            simulated: alpha_cell(&simulated.item_scores, &simulated.item_labels, &wanted),
        });
    }
    for domain in &spec.domains {
        let wanted: Vec<String> = domain.item_ids.iter().map(|id| format!("Item{id}")).collect();
        rows.push(AlphaRow {
            level: "domain".into(),
            unit: domain.name.clone(),
            reference: alpha_cell(&reference.item_scores, &reference.item_labels, &wanted),
            simulated: alpha_cell(&simulated.item_scores, &simulated.item_labels, &wanted),
        });
    }
    rows
}

fn summarize_fit(fit: &Result<CfaFit, String>) -> FitSummary {
    match fit {
        Ok(fit) => FitSummary {
            error: None,
            converged: Some(fit.converged),
            iterations: Some(fit.iterations),
            n: Some(fit.n),
            df: Some(fit.df),
            f_ml: Cell::value(fit.f_ml),
            chi2: Cell::value(fit.chi2),
            cfi: Cell::from_option(fit.indices.cfi, "degenerate baseline model"),
            tli: Cell::from_option(fit.indices.tli, "zero degrees of freedom"),
            rmsea: Cell::from_option(fit.indices.rmsea, "zero degrees of freedom"),
            srmr: Cell::value(fit.indices.srmr),
            warnings: fit.warnings.iter().map(|w| w.label().to_string()).collect(),
        },
        Err(reason) => FitSummary {
            error: Some(reason.clone()),
            converged: None,
            iterations: None,
            n: None,
            df: None,
            f_ml: Cell::undefined(reason.clone()),
            chi2: Cell::undefined(reason.clone()),
            cfi: Cell::undefined(reason.clone()),
            tli: Cell::undefined(reason.clone()),
            rmsea: Cell::undefined(reason.clone()),
            srmr: Cell::undefined(reason.clone()),
            warnings: Vec::new(),
        },
    }
}

struct ModelPlan {
    name: String,
    spec: CfaModelSpec,
    level: Level,
    indicator_labels: Vec<String>,
}

fn model_plans(spec: &ScaleSpec) -> Result<Vec<ModelPlan>, PipelineError> {
    let mut plans = Vec::with_capacity(spec.domains.len() + 1);
    for domain in &spec.domains {
        let model = build_tfm_spec(domain, spec)?;
        let labels = model.indicator_names().to_vec();
        plans.push(ModelPlan {
            name: domain.name.clone(),
            spec: model,
            level: Level::Item,
            indicator_labels: labels,
        });
    }
    let ffm = build_ffm_spec(spec)?;
    let labels = ffm.indicator_names().to_vec();
    plans.push(ModelPlan {
        name: "FFM".into(),
        spec: ffm,
        level: Level::Facet,
        indicator_labels: labels,
    });
    Ok(plans)
}

fn run_fits(
    plans: &[ModelPlan],
    reference: &ScoredSample,
    simulated: &ScoredSample,
    options: &CfaOptions,
) -> Result<Vec<(Result<CfaFit, String>, Result<CfaFit, String>)>, PipelineError> {
    struct Job<'a> {
        index: usize,
        plan: &'a ModelPlan,
        grid: DMatrix<f64>,
    }
    let mut jobs = Vec::with_capacity(plans.len() * 2);
    for (mi, plan) in plans.iter().enumerate() {
        for (si, sample) in [reference, simulated].into_iter().enumerate() {
            let grid = columns_by_label(
                plan.grid_of(sample),
                sample.labels(plan.level),
                &plan.indicator_labels,
            )?;
            jobs.push(Job {
                index: mi * 2 + si,
                plan,
                grid,
            });
        }
    }
    let results: Mutex<Vec<(usize, Result<CfaFit, String>)>> =
        Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|scope| {
        for job in &jobs {
            scope.spawn(|| {
                let fit = sample_covariance(&job.grid, job.plan.indicator_labels.clone())
                    .and_then(|cov| fit_ml(&cov, &job.plan.spec, options))
                    .map_err(|e| e.to_string());
                results.lock().unwrap().push((job.index, fit));
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(i, _)| *i);
    let mut out = Vec::with_capacity(plans.len());
    let mut iter = collected.into_iter();
    while let (Some((_, r)), Some((_, s))) = (iter.next(), iter.next()) {
        out.push((r, s));
    }
    Ok(out)
}

impl ModelPlan {
    fn grid_of<'a>(&self, sample: &'a ScoredSample) -> &'a DMatrix<f64> {
        sample.grid(self.level)
    }
}

fn structural_entry(
    plan: &ModelPlan,
    reference: &Result<CfaFit, String>,
    simulated: &Result<CfaFit, String>,
    warnings: &mut Vec<String>,
) -> StructuralEntry {
    for (sample, fit) in [("reference", reference), ("simulated", simulated)] {
        match fit {
            Ok(f) => {
                for w in &f.warnings {
                    warnings.push(format!("cfa {} ({sample}): {}", plan.name, w.label()));
                }
            }
            Err(e) => warnings.push(format!("cfa {} ({sample}): {e}", plan.name)),
        }
    }
    let mut congruence = Vec::new();
    let mut congruence_error = None;
    let mut phi_deltas = Vec::new();
    if let (Ok(r), Ok(s)) = (reference, simulated) {
        match congruence_report(r, s) {
            Ok(rep) => {
                congruence = rep
                    .factors
                    .into_iter()
                    .map(|f| FactorComparison {
                        factor: f.factor,
                        tcc: Cell::value(f.tcc),
                        band: Some(f.band.label().to_string()),
                        loading_mae: Cell::value(f.loading_mae),
                    })
                    .collect();
            }
            Err(e) => {
                warnings.push(format!("congruence {}: {e}", plan.name));
                congruence_error = Some(e.to_string());
            }
        }
        let names = plan.spec.factor_names();
        for j in 0..names.len() {
            for k in (j + 1)..names.len() {
                let rv = r.phi[(j, k)];
                let sv = s.phi[(j, k)];
                phi_deltas.push(PhiDelta {
                    pair: format!("{}~{}", names[j], names[k]),
                    reference: Cell::value(rv),
                    simulated: Cell::value(sv),
                    delta: Cell::value(sv - rv),
                });
            }
        }
    } else {
        congruence_error = Some("requires both fits".into());
    }
    StructuralEntry {
        model: plan.name.clone(),
        reference: summarize_fit(reference),
        simulated: summarize_fit(simulated),
        congruence,
        congruence_error,
        phi_deltas,
    }
}

fn correlation_cells(grid: &DMatrix<f64>, p: usize) -> (Vec<Vec<Cell>>, Cell) {
    match stats::correlation_matrix(grid) {
        Ok(m) => {
            let cells = (0..p)
                .map(|i| (0..p).map(|j| Cell::value(m[(i, j)])).collect())
                .collect();
            (cells, Cell::from_result(stats::discriminant_mean_abs(&m)))
        }
        Err(e) => {
            let reason = e.to_string();
            let cells = (0..p)
                .map(|_| (0..p).map(|_| Cell::undefined(reason.clone())).collect())
                .collect();
            (cells, Cell::undefined(reason))
        }
    }
}

fn similarity_block(
    reference: &ScoredSample,
    simulated: &ScoredSample,
    warnings: &mut Vec<String>,
) -> SimilarityBlock {
    let mut ref_ids = reference.subject_ids.clone();
    let mut sim_ids = simulated.subject_ids.clone();
    ref_ids.sort();
    sim_ids.sort();
    if ref_ids != sim_ids {
        let shared = {
            let sim_set: std::collections::HashSet<&String> = sim_ids.iter().collect();
            ref_ids.iter().filter(|id| sim_set.contains(id)).count()
        };
        let note = format!(
            "unpaired: subject ids differ ({} of {} reference ids present in the simulated sample)",
            shared,
            ref_ids.len()
        );
        warnings.push(format!("similarity block {note}"));
        return SimilarityBlock {
            paired: false,
            note: Some(note),
            n_pairs: 0,
            per_domain: Vec::new(),
            mean_r: Cell::undefined("unpaired samples"),
        };
    }
    let sim_rows: HashMap<&str, usize> = simulated
        .subject_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let order: Vec<usize> = reference
        .subject_ids
        .iter()
        .map(|id| sim_rows[id.as_str()])
        .collect();
    let mut per_domain = Vec::with_capacity(reference.domain_names.len());
    let mut rs = Vec::new();
    let mut all_defined = true;
    for (dj, domain) in reference.domain_names.iter().enumerate() {
        let sj = simulated
            .domain_names
            .iter()
            .position(|d| d == domain)
            .unwrap_or(dj);
        let ref_col = column_vec(&reference.domain_scores, dj);
        let sim_col: Vec<f64> = order
            .iter()
            .map(|&row| simulated.domain_scores[(row, sj)])
            .collect();
        let r = Cell::from_result(stats::pearson_r(&ref_col, &sim_col));
        match r.as_f64() {
            Some(v) => rs.push(v),
            None => all_defined = false,
        }
        per_domain.push(DomainSimilarity {
            domain: domain.clone(),
            mae: Cell::from_result(stats::mae(&ref_col, &sim_col)),
            r,
        });
    }
    let mean_r = if all_defined && !rs.is_empty() {
        Cell::value(rs.iter().sum::<f64>() / rs.len() as f64)
    } else {
        Cell::undefined("component correlation undefined")
    };
    SimilarityBlock {
        paired: true,
        note: None,
        n_pairs: reference.subject_ids.len(),
        per_domain,
        mean_r,
    }
}

fn criterion_side(
    sample: &ScoredSample,
    totals_by_id: &HashMap<&str, f64>,
) -> (usize, Result<Vec<(String, f64)>, CriterionError>) {
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for (i, id) in sample.subject_ids.iter().enumerate() {
        if let Some(&t) = totals_by_id.get(id.as_str()) {
            rows.push(i);
            totals.push(t);
        }
    }
    let mut grid = DMatrix::zeros(rows.len(), sample.domain_names.len());
    for (out_row, &src_row) in rows.iter().enumerate() {
        for j in 0..sample.domain_names.len() {
            grid[(out_row, j)] = sample.domain_scores[(src_row, j)];
        }
    }
    let result = criterion_correlations(&grid, &sample.domain_names, &totals);
    (rows.len(), result)
}

fn criterion_block(
    input: &CriterionInput,
    reference: &ScoredSample,
    simulated: &ScoredSample,
    warnings: &mut Vec<String>,
) -> Result<CriterionBlock, PipelineError> {
    let scores = score_criterion(&input.responses, &input.spec)?;
    let totals_by_id: HashMap<&str, f64> = scores
        .subject_ids
        .iter()
        .map(String::as_str)
        .zip(scores.totals.iter().copied())
        .collect();
    let (ref_pairs, ref_result) = criterion_side(reference, &totals_by_id);
    let (sim_pairs, sim_result) = criterion_side(simulated, &totals_by_id);
    for (sample, result) in [("reference", &ref_result), ("simulated", &sim_result)] {
        if let Err(e) = result {
            warnings.push(format!("criterion {} ({sample}): {e}", input.spec.name));
        }
    }
    let lookup = |result: &Result<Vec<(String, f64)>, CriterionError>, domain: &str| -> Cell {
        match result {
            Ok(rows) => rows
                .iter()
                .find(|(d, _)| d == domain)
                .map(|&(_, r)| Cell::value(r))
                .unwrap_or_else(|| Cell::undefined("domain missing")),
            Err(e) => Cell::undefined(e.to_string()),
        }
    };
    let order = report_domain_order(&reference.domain_names);
    let rows = order
        .into_iter()
        .map(|j| {
            let domain = reference.domain_names[j].clone();
            let reference_r = lookup(&ref_result, &domain);
            let simulated_r = lookup(&sim_result, &domain);
            CriterionRow {
                domain,
                reference_r,
                simulated_r,
            }
        })
        .collect();
    Ok(CriterionBlock {
        name: input.spec.name.clone(),
        reference_pairs: ref_pairs,
        simulated_pairs: sim_pairs,
        rows,
    })
}

/// Converts raw ablation results into report rows.
pub fn ablation_rows(results: &[AblationResult]) -> Vec<AblationRow> {
    results
        .iter()
        .map(|r| AblationRow {
            removed_question: r.removed_question,
            aligned_subjects: r.aligned_subjects,
            cells: r
                .per_domain
                .iter()
                .map(|d| AblationDomainCell {
                    domain: d.domain.clone(),
                    r_squared: match (d.value, &d.note) {
                        (Some(v), _) => Cell::value(v),
                        (None, Some(note)) => Cell::undefined(note.clone()),
                        (None, None) => Cell::undefined("unavailable"),
                    },
                })
                .collect(),
            failure: r.failure.clone(),
        })
        .collect()
}

fn pca_block(
    level: Level,
    reference: &ScoredSample,
    simulated: &ScoredSample,
    warnings: &mut Vec<String>,
) -> PcaLevelBlock {
    let level_name = match level {
        Level::Item => "item",
        Level::Facet => "facet",
        Level::Domain => "domain",
    };
    let build = || -> Result<([f64; 2], Vec<PcaPoint>), PcaError> {
        let basis = fit_pca2(reference.grid(level))?;
        let ref_proj = project(&basis, reference.grid(level))?;
        let sim_grid = columns_by_label(
            simulated.grid(level),
            simulated.labels(level),
            reference.labels(level),
        )
        .map_err(|e| PcaError::Shape(e.to_string()))?;
        let sim_proj = project(&basis, &sim_grid)?;
        let mut points = Vec::with_capacity(
            reference.subject_ids.len() + simulated.subject_ids.len(),
        );
        for (i, id) in reference.subject_ids.iter().enumerate() {
            points.push(PcaPoint {
                source: "reference".into(),
                subject_id: id.clone(),
                dim1: ref_proj.coords[(i, 0)],
                dim2: ref_proj.coords[(i, 1)],
            });
        }
        for (i, id) in simulated.subject_ids.iter().enumerate() {
            points.push(PcaPoint {
                source: "simulated".into(),
                subject_id: id.clone(),
                dim1: sim_proj.coords[(i, 0)],
                dim2: sim_proj.coords[(i, 1)],
            });
        }
        Ok((basis.eigenvalues, points))
    };
    match build() {
        Ok((eigenvalues, points)) => PcaLevelBlock {
            level: level_name.to_string(),
            eigenvalues: Some(eigenvalues),
            points,
            error: None,
        },
        Err(e) => {
            warnings.push(format!("pca {level_name}: {e}"));
            PcaLevelBlock {
                level: level_name.to_string(),
                eigenvalues: None,
                points: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Scores both samples and assembles the full comparison report.
///
/// Raw matrices are reverse coded first; matrices declared
/// [`Coding::ReverseApplied`] are taken as they are. Localized numeric
/// failures become `undefined` cells plus metadata warnings; only errors
/// that leave nothing to report (unscoreable input) abort.
pub fn compare_samples(
    human: &ResponseMatrix,
    simulated: &ResponseMatrix,
    spec: &ScaleSpec,
    options: &CompareOptions,
) -> Result<ComparisonReport, PipelineError> {
    let mut warnings = Vec::new();
    let ref_coded = ensure_reverse_coded(human, spec)?;
    let sim_coded = ensure_reverse_coded(simulated, spec)?;
    let reference = score(&ref_coded, spec, options.missing_policy)?;
    let sim_scored = score(&sim_coded, spec, options.missing_policy)?;
    for (sample, scored) in [("reference", &reference), ("simulated", &sim_scored)] {
        if !scored.dropped_subjects.is_empty() {
            warnings.push(format!(
                "{sample} sample: {} subject(s) dropped by the missing-data policy",
                scored.dropped_subjects.len()
            ));
        }
    }

    let descriptives = vec![
        level_descriptives(Level::Item, &reference, &sim_scored, &mut warnings),
        level_descriptives(Level::Facet, &reference, &sim_scored, &mut warnings),
        level_descriptives(Level::Domain, &reference, &sim_scored, &mut warnings),
    ];
    let reliability = reliability_rows(spec, &reference, &sim_scored);

    let plans = model_plans(spec)?;
    let fits = run_fits(&plans, &reference, &sim_scored, &options.cfa)?;
    let structural = plans
        .iter()
        .zip(&fits)
        .map(|(plan, (r, s))| structural_entry(plan, r, s, &mut warnings))
        .collect();

    let p = reference.domain_names.len();
    let (ref_cells, ref_mean) = correlation_cells(&reference.domain_scores, p);
    let (sim_cells, sim_mean) = correlation_cells(&sim_scored.domain_scores, p);
    if ref_mean.as_f64().is_none() || sim_mean.as_f64().is_none() {
        warnings.push("discriminant block: correlation matrix undefined".into());
    }
    let discriminant = DiscriminantBlock {
        domains: reference.domain_names.clone(),
        reference: ref_cells,
        simulated: sim_cells,
        reference_mean_abs: ref_mean,
        simulated_mean_abs: sim_mean,
    };

    let similarity = similarity_block(&reference, &sim_scored, &mut warnings);

    let mut criteria = Vec::with_capacity(options.criteria.len());
    for input in &options.criteria {
        criteria.push(criterion_block(input, &reference, &sim_scored, &mut warnings)?);
    }

    let ablation = options.ablation.as_deref().map(ablation_rows);

    let pca = vec![
        pca_block(Level::Item, &reference, &sim_scored, &mut warnings),
        pca_block(Level::Facet, &reference, &sim_scored, &mut warnings),
        pca_block(Level::Domain, &reference, &sim_scored, &mut warnings),
    ];

    let metadata = ReportMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scale_name: spec.name.clone(),
        scale_version: spec.version.clone(),
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        seeds: options.seeds.clone(),
        reference_subjects: reference.subject_ids.len(),
        simulated_subjects: sim_scored.subject_ids.len(),
        warnings,
    };

    Ok(ComparisonReport {
        metadata,
        descriptives,
        reliability,
        structural,
        discriminant,
        similarity,
        criteria,
        ablation,
        pca,
    })
}

/// Output formats for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_writer(std::fs::File::create(path)?);
    writer
        .write_record(header)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn opt_display<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the report to `out_dir` in the requested formats and returns the
/// paths written. JSON output is canonical (see [`report_json`]); CSV
/// tables render numbers at six significant digits and undefined cells as
/// `undefined:<reason>`.
pub fn emit_report(
    report: &ComparisonReport,
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Json) {
        let path = out_dir.join("report.json");
        std::fs::write(&path, report_json(report)?)?;
        written.push(path);
    }
    if !formats.contains(&ReportFormat::Csv) {
        return Ok(written);
    }

    for level in &report.descriptives {
        let path = out_dir.join(format!("descriptives_{}.csv", level.level));
        let rows: Vec<Vec<String>> = level
            .units
            .iter()
            .map(|u| {
                vec![
                    u.unit.clone(),
                    u.reference_mu.render(),
                    u.reference_sigma.render(),
                    u.simulated_mu.render(),
                    u.simulated_sigma.render(),
                ]
            })
            .collect();
        write_csv(
            &path,
            &[
                "unit".into(),
                "reference_mu".into(),
                "reference_sigma".into(),
                "simulated_mu".into(),
                "simulated_sigma".into(),
            ],
            &rows,
        )?;
        written.push(path);
    }

    let path = out_dir.join("hai_radar.csv");
    let rows: Vec<Vec<String>> = report
        .descriptives
        .iter()
        .map(|l| {
            vec![
                l.level.clone(),
                l.mu_mae.render(),
                l.sigma_mae.render(),
                l.hai.render(),
            ]
        })
        .collect();
    write_csv(
        &path,
        &["level".into(), "mu_mae".into(), "sigma_mae".into(), "hai".into()],
        &rows,
    )?;
    written.push(path);

    let path = out_dir.join("reliability.csv");
    let rows: Vec<Vec<String>> = report
        .reliability
        .iter()
        .map(|r| {
            vec![
                r.level.clone(),
                r.unit.clone(),
                r.reference.render(),
                r.simulated.render(),
            ]
        })
        .collect();
    write_csv(
        &path,
        &[
            "level".into(),
            "unit".into(),
            "reference_alpha".into(),
            "simulated_alpha".into(),
        ],
        &rows,
    )?;
    written.push(path);

    let path = out_dir.join("structural.csv");
    let mut rows = Vec::new();
    for entry in &report.structural {
        for (sample, fit) in [("reference", &entry.reference), ("simulated", &entry.simulated)] {
            rows.push(vec![
                entry.model.clone(),
                sample.to_string(),
                opt_display(&fit.converged),
                fit.chi2.render(),
                opt_display(&fit.df),
                fit.cfi.render(),
                fit.tli.render(),
                fit.rmsea.render(),
                fit.srmr.render(),
                fit.warnings.join("; "),
                opt_display(&fit.error),
            ]);
        }
    }
    write_csv(
        &path,
        &[
            "model".into(),
            "sample".into(),
            "converged".into(),
            "chi2".into(),
            "df".into(),
            "cfi".into(),
            "tli".into(),
            "rmsea".into(),
            "srmr".into(),
            "warnings".into(),
            "error".into(),
        ],
        &rows,
    )?;
    written.push(path);

    let path = out_dir.join("congruence.csv");
    let mut rows = Vec::new();
    for entry in &report.structural {
        for f in &entry.congruence {
            rows.push(vec![
                entry.model.clone(),
                f.factor.clone(),
                f.tcc.render(),
                f.band.clone().unwrap_or_default(),
                f.loading_mae.render(),
            ]);
        }
    }
    write_csv(
        &path,
        &[
            "model".into(),
            "factor".into(),
            "tcc".into(),
            "band".into(),
            "loading_mae".into(),
        ],
        &rows,
    )?;
    written.push(path);

    let path = out_dir.join("phi_deltas.csv");
    let mut rows = Vec::new();
    for entry in &report.structural {
        for d in &entry.phi_deltas {
            rows.push(vec![
                entry.model.clone(),
                d.pair.clone(),
                d.reference.render(),
                d.simulated.render(),
                d.delta.render(),
            ]);
        }
    }
    write_csv(
        &path,
        &[
            "model".into(),
            "pair".into(),
            "reference".into(),
            "simulated".into(),
            "delta".into(),
        ],
        &rows,
    )?;
    written.push(path);

    let path = out_dir.join("discriminant.csv");
    let mut header = vec!["sample".to_string(), "domain".to_string()];
    header.extend(report.discriminant.domains.iter().cloned());
    let mut rows = Vec::new();
    for (sample, cells) in [
        ("reference", &report.discriminant.reference),
        ("simulated", &report.discriminant.simulated),
    ] {
        for (i, domain) in report.discriminant.domains.iter().enumerate() {
            let mut row = vec![sample.to_string(), domain.clone()];
            row.extend(cells[i].iter().map(Cell::render));
            rows.push(row);
        }
    }
    write_csv(&path, &header, &rows)?;
    written.push(path);

    let path = out_dir.join("discriminant_summary.csv");
    write_csv(
        &path,
        &["sample".into(), "mean_abs_off_diagonal".into()],
        &[
            vec![
                "reference".into(),
                report.discriminant.reference_mean_abs.render(),
            ],
            vec![
                "simulated".into(),
                report.discriminant.simulated_mean_abs.render(),
            ],
        ],
    )?;
    written.push(path);

    let path = out_dir.join("similarity.csv");
    let rows: Vec<Vec<String>> = report
        .similarity
        .per_domain
        .iter()
        .map(|d| vec![d.domain.clone(), d.mae.render(), d.r.render()])
        .collect();
    write_csv(&path, &["domain".into(), "mae".into(), "r".into()], &rows)?;
    written.push(path);

    for block in &report.criteria {
        let path = out_dir.join(format!("criterion_{}.csv", block.name.to_lowercase()));
        let rows: Vec<Vec<String>> = block
            .rows
            .iter()
            .map(|r| vec![r.domain.clone(), r.reference_r.render(), r.simulated_r.render()])
            .collect();
        write_csv(
            &path,
            &["domain".into(), "reference_r".into(), "simulated_r".into()],
            &rows,
        )?;
        written.push(path);
    }

    if let Some(ablation) = &report.ablation {
        let path = out_dir.join("ablation.csv");
        let domains: Vec<String> = ablation
            .iter()
            .find(|r| !r.cells.is_empty())
            .map(|r| r.cells.iter().map(|c| c.domain.clone()).collect())
            .unwrap_or_default();
        let mut header = vec!["removed_question".to_string(), "aligned_subjects".to_string()];
        header.extend(domains.iter().cloned());
        header.push("failure".into());
        let mut rows = Vec::new();
        for r in ablation {
            let mut row = vec![r.removed_question.to_string(), r.aligned_subjects.to_string()];
            for domain in &domains {
                let cell = r
                    .cells
                    .iter()
                    .find(|c| &c.domain == domain)
                    .map(|c| c.r_squared.render())
                    .unwrap_or_default();
                row.push(cell);
            }
            row.push(opt_display(&r.failure));
            rows.push(row);
        }
        write_csv(&path, &header, &rows)?;
        written.push(path);
    }

    for block in &report.pca {
        let path = out_dir.join(format!("pca_{}.csv", block.level));
        let rows: Vec<Vec<String>> = block
            .points
            .iter()
            .map(|p| {
                vec![
                    p.source.clone(),
                    format_sig6(p.dim1),
                    format_sig6(p.dim2),
                ]
            })
            .collect();
        write_csv(&path, &["source".into(), "dim1".into(), "dim2".into()], &rows)?;
        written.push(path);
    }

    Ok(written)
}
