//! Behavioral-criterion evaluation: scoring frequency scales, correlating
//! criterion totals with personality domains, and the leave-one-question-out
//! ablation driver.

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scale::{
    apply_reverse_coding, score, LikertScale, MissingPolicy, ResponseMatrix, ScaleSpec,
    ScoredSample,
};
use crate::sim::{
    run_simulation, InterviewTranscript, Responder, SimulationConfig, SubjectProfile,
};
use crate::stats::{self, StatsError};

/// Errors from criterion scoring and correlation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("criterion item {0} missing from response matrix")]
    MissingItem(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CriterionError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            CriterionError::MissingItem(_) => "MissingItemError",
            CriterionError::Argument(_) => "ArgumentError",
            CriterionError::Stats(e) => e.name(),
        }
    }
}

/// A flat behavioral scale: named items on a frequency range, none reverse
/// keyed.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSpec {
    pub name: String,
    pub item_ids: Vec<u32>,
    pub likert: LikertScale,
}

impl CriterionSpec {
    pub fn new(
        name: impl Into<String>,
        item_ids: Vec<u32>,
        likert: LikertScale,
    ) -> Result<Self, CriterionError> {
        if item_ids.len() < 2 {
            return Err(CriterionError::Argument(format!(
                "criterion needs at least 2 items, got {}",
                item_ids.len()
            )));
        }
        Ok(CriterionSpec {
            name: name.into(),
            item_ids,
            likert,
        })
    }

    /// The ten-item organizational citizenship behavior scale, rated on a
    /// 1 (never) to 5 (every day) frequency range.
    pub fn ocb() -> Self {
        CriterionSpec {
            name: "OCB".into(),
            item_ids: (1..=10).collect(),
            likert: LikertScale { min: 1, max: 5 },
        }
    }

    /// The ten-item counterproductive work behavior scale, same range.
    pub fn cwb() -> Self {
        CriterionSpec {
            name: "CWB".into(),
            item_ids: (1..=10).collect(),
            likert: LikertScale { min: 1, max: 5 },
        }
    }
}

/// Per-subject criterion totals (means over the scale items; subjects with
/// any missing criterion item are dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionScores {
    pub subject_ids: Vec<String>,
    pub totals: Vec<f64>,
    pub dropped_subjects: Vec<String>,
}

/// Scores a criterion scale: the per-subject mean over its items, with no
/// reverse coding (the scales carry none).
pub fn score_criterion(
    matrix: &ResponseMatrix,
    spec: &CriterionSpec,
) -> Result<CriterionScores, CriterionError> {
    let columns: Vec<usize> = spec
        .item_ids
        .iter()
        .map(|&id| {
            matrix
                .column_of(id)
                .ok_or_else(|| CriterionError::MissingItem(format!("{}{id}", spec.name)))
        })
        .collect::<Result<_, _>>()?;
    let mut subject_ids = Vec::new();
    let mut totals = Vec::new();
    let mut dropped = Vec::new();
    for row in 0..matrix.n_subjects() {
        let mut sum = 0.0;
        let mut complete = true;
        for &col in &columns {
            match matrix.value(row, col) {
                Some(v) => sum += v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            subject_ids.push(matrix.subject_ids()[row].clone());
            totals.push(sum / columns.len() as f64);
        } else {
            dropped.push(matrix.subject_ids()[row].clone());
        }
    }
    Ok(CriterionScores {
        subject_ids,
        totals,
        dropped_subjects: dropped,
    })
}

/// Canonical presentation order for the five-domain correlation tables:
/// Extraversion, Agreeableness, Neuroticism, Conscientiousness, Openness.
/// Returns index positions into `names`; any other domain set keeps its
/// given order.
pub fn report_domain_order(names: &[String]) -> Vec<usize> {
    const TABLE_ORDER: [&str; 5] = [
        "Extraversion",
        "Agreeableness",
        "Neuroticism",
        "Conscientiousness",
        "Openness",
    ];
    if names.len() == 5 {
        let mapped: Option<Vec<usize>> = TABLE_ORDER
            .iter()
            .map(|want| names.iter().position(|n| n == want))
            .collect();
        if let Some(order) = mapped {
            return order;
        }
    }
    (0..names.len()).collect()
}

/// Pearson correlation of each personality domain with the criterion
/// totals, over subjects aligned by the caller. Output follows
/// [`report_domain_order`].
pub fn criterion_correlations(
    domain_scores: &DMatrix<f64>,
    domain_names: &[String],
    totals: &[f64],
) -> Result<Vec<(String, f64)>, CriterionError> {
    if domain_scores.ncols() != domain_names.len() {
        return Err(CriterionError::Argument(format!(
            "{} domain columns but {} names",
            domain_scores.ncols(),
            domain_names.len()
        )));
    }
    if domain_scores.nrows() != totals.len() {
        return Err(CriterionError::Argument(format!(
            "{} score rows but {} criterion totals",
            domain_scores.nrows(),
            totals.len()
        )));
    }
    let mut out = Vec::with_capacity(domain_names.len());
    for &j in &report_domain_order(domain_names) {
        let column: Vec<f64> = domain_scores.column(j).iter().copied().collect();
        let r = stats::pearson_r(&column, totals)?;
        out.push((domain_names[j].clone(), r));
    }
    Ok(out)
}

/// Coefficient of determination for one domain in one ablation condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainRSquared {
    pub domain: String,
    pub value: Option<f64>,
    /// Why `value` is absent, when it is.
    pub note: Option<String>,
}

/// Result of one ablation condition: the baseline (question 0, meaning none
/// removed) or one removed question.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    /// 0 for the all-questions baseline, otherwise the removed question
    /// number in 1..=32.
    pub removed_question: usize,
    pub per_domain: Vec<DomainRSquared>,
    /// Set when the whole condition failed (simulation or scoring error);
    /// `per_domain` is empty in that case.
    pub failure: Option<String>,
    /// Subjects actually used after aligning simulated and human samples.
    pub aligned_subjects: usize,
}

fn question_mask(full: usize, removed: usize) -> u64 {
    let all = (1u64 << full) - 1;
    if removed == 0 {
        all
    } else {
        all & !(1u64 << (removed - 1))
    }
}

fn ablation_condition(
    transcripts: &[InterviewTranscript],
    removed: usize,
    spec: &ScaleSpec,
    cfg: &SimulationConfig,
    responder: &dyn Responder,
    human: &ScoredSample,
    cache: &mut HashMap<u64, ScoredSample>,
) -> AblationResult {
    let mask = question_mask(transcripts[0].qa().len(), removed);
    let scored = if let Some(hit) = cache.get(&mask) {
        hit.clone()
    } else {
        let profiles: Result<Vec<SubjectProfile>, _> = transcripts
            .iter()
            .map(|t| {
                if removed == 0 {
                    Ok(SubjectProfile::Interview(t.clone()))
                } else {
                    t.drop_question(removed).map(SubjectProfile::Interview)
                }
            })
            .collect();
        let outcome = match profiles.and_then(|p| run_simulation(&p, spec, cfg, responder)) {
            Ok(o) => o,
            Err(e) => {
                return AblationResult {
                    removed_question: removed,
                    per_domain: Vec::new(),
                    failure: Some(e.to_string()),
                    aligned_subjects: 0,
                }
            }
        };
        let scored = apply_reverse_coding(&outcome.matrix, spec)
            .and_then(|coded| score(&coded, spec, MissingPolicy::ListwiseDelete));
        match scored {
            Ok(s) => {
                cache.insert(mask, s.clone());
                s
            }
            Err(e) => {
                return AblationResult {
                    removed_question: removed,
                    per_domain: Vec::new(),
                    failure: Some(e.to_string()),
                    aligned_subjects: 0,
                }
            }
        }
    };

    // Align by subject id: simulated scoring may have dropped subjects.
    let human_rows: HashMap<&str, usize> = human
        .subject_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let pairs: Vec<(usize, usize)> = scored
        .subject_ids
        .iter()
        .enumerate()
        .filter_map(|(sim_row, id)| human_rows.get(id.as_str()).map(|&h| (sim_row, h)))
        .collect();

    let mut per_domain = Vec::with_capacity(human.domain_names.len());
    for (dj, domain) in human.domain_names.iter().enumerate() {
        let sim_col = scored.domain_names.iter().position(|d| d == domain);
        let Some(sj) = sim_col else {
            per_domain.push(DomainRSquared {
                domain: domain.clone(),
                value: None,
                note: Some("domain absent from simulated scores".into()),
            });
            continue;
        };
        let sim: Vec<f64> = pairs.iter().map(|&(s, _)| scored.domain_scores[(s, sj)]).collect();
        let hum: Vec<f64> = pairs.iter().map(|&(_, h)| human.domain_scores[(h, dj)]).collect();
        match stats::r_squared(&sim, &hum) {
            Ok(v) => per_domain.push(DomainRSquared {
                domain: domain.clone(),
                value: Some(v),
                note: None,
            }),
            Err(e) => per_domain.push(DomainRSquared {
                domain: domain.clone(),
                value: None,
                note: Some(e.to_string()),
            }),
        }
    }
    AblationResult {
        removed_question: removed,
        per_domain,
        failure: None,
        aligned_subjects: pairs.len(),
    }
}

/// Runs the leave-one-question-out ablation: a baseline with all questions,
/// then one condition per question with that question removed from every
/// transcript. Each condition simulates responses, scores them, aligns
/// subjects with the human sample by id, and computes per-domain R-squared
/// of human scores on simulated scores.
///
/// Always returns one result per condition (baseline + one per question);
/// conditions that fail are marked, never dropped. Simulated score grids are
/// cached by question mask within the run, so repeating a condition is free.
pub fn run_ablation(
    transcripts: &[InterviewTranscript],
    spec: &ScaleSpec,
    cfg: &SimulationConfig,
    responder: &dyn Responder,
    human: &ScoredSample,
) -> Result<Vec<AblationResult>, CriterionError> {
    if transcripts.is_empty() {
        return Err(CriterionError::Argument("no transcripts".into()));
    }
    let questions = transcripts[0].qa().len();
    if transcripts.iter().any(|t| t.qa().len() != questions) {
        return Err(CriterionError::Argument(
            "transcripts have differing question counts".into(),
        ));
    }
    if questions > 64 {
        return Err(CriterionError::Argument(format!(
            "{questions} questions exceed the supported mask width"
        )));
    }
    let mut cache = HashMap::new();
    let mut results = Vec::with_capacity(questions + 1);
    for removed in 0..=questions {
        results.push(ablation_condition(
            transcripts,
            removed,
            spec,
            cfg,
            responder,
            human,
            &mut cache,
        ));
    }
    Ok(results)
}
