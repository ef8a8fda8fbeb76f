//! Simulated scale administration: method-specific personality descriptions,
//! per-item prompts, reply parsing, and the batch driver that assembles a
//! raw response matrix.
//!
//! Three description methods are supported. An interview transcript renders
//! its question/answer pairs in full; a persona profile renders five short
//! self-descriptive sentences; a shape profile renders five trait-adjective
//! markers at one of nine intensity levels. Every (subject, item) cell costs
//! one request to the responder, and replies that cannot be parsed become
//! missing cells recorded in a failure ledger rather than fabricated values.

mod questions;
mod responder;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub use questions::CANONICAL_QUESTIONS;
pub use responder::{HttpResponder, MockResponder, Responder, ResponderError};

use crate::scale::{Coding, ItemDef, LikertScale, ResponseMatrix, ScaleSpec};

/// Errors from profile validation, prompt parsing, and the run driver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no standalone integer in range found in reply {0:?}")]
    Unparseable(String),
    #[error("responder failed: {0}")]
    Responder(String),
}

impl SimError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            SimError::Profile(_) => "ProfileError",
            SimError::Config(_) => "ConfigError",
            SimError::Unparseable(_) => "UnparseableResponseError",
            SimError::Responder(_) => "ResponderError",
        }
    }
}

/// Description-construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Psi,
    Persona,
    Shape,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Psi => "psi",
            Method::Persona => "persona",
            Method::Shape => "shape",
        }
    }
}

/// One question/answer pair of an interview.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

/// A structured personality interview transcript.
///
/// Constructors enforce the full 32-pair form; [`drop_question`] produces
/// the 31-pair leave-one-out variant used by ablation.
///
/// [`drop_question`]: InterviewTranscript::drop_question
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterviewTranscript {
    pub subject_id: String,
    qa: Vec<QaPair>,
}

impl InterviewTranscript {
    /// Pairs 32 answers with the canonical question list. Answers may be
    /// "NA" (or any text); only the count is constrained.
    pub fn from_answers(
        subject_id: impl Into<String>,
        answers: Vec<String>,
    ) -> Result<Self, SimError> {
        if answers.len() != CANONICAL_QUESTIONS.len() {
            return Err(SimError::Profile(format!(
                "expected {} answers, got {}",
                CANONICAL_QUESTIONS.len(),
                answers.len()
            )));
        }
        Ok(InterviewTranscript {
            subject_id: subject_id.into(),
            qa: CANONICAL_QUESTIONS
                .iter()
                .zip(answers)
                .map(|(q, answer)| QaPair {
                    question: (*q).to_string(),
                    answer,
                })
                .collect(),
        })
    }

    /// Builds a transcript from explicit pairs; requires 32 pairs with
    /// non-empty questions.
    pub fn with_questions(
        subject_id: impl Into<String>,
        qa: Vec<QaPair>,
    ) -> Result<Self, SimError> {
        if qa.len() != CANONICAL_QUESTIONS.len() {
            return Err(SimError::Profile(format!(
                "expected {} question/answer pairs, got {}",
                CANONICAL_QUESTIONS.len(),
                qa.len()
            )));
        }
        if let Some(i) = qa.iter().position(|p| p.question.trim().is_empty()) {
            return Err(SimError::Profile(format!("question {} is empty", i + 1)));
        }
        Ok(InterviewTranscript {
            subject_id: subject_id.into(),
            qa,
        })
    }

    pub fn qa(&self) -> &[QaPair] {
        &self.qa
    }

    /// Whether the questions equal the canonical list byte for byte.
    pub fn matches_canonical(&self) -> bool {
        self.qa.len() == CANONICAL_QUESTIONS.len()
            && self
                .qa
                .iter()
                .zip(CANONICAL_QUESTIONS.iter())
                .all(|(pair, q)| pair.question == *q)
    }

    /// Returns a copy with question `number` (1-based) removed, the
    /// leave-one-out form used by the ablation driver.
    pub fn drop_question(&self, number: usize) -> Result<Self, SimError> {
        if number == 0 || number > self.qa.len() {
            return Err(SimError::Profile(format!(
                "question number {number} out of 1..={}",
                self.qa.len()
            )));
        }
        let mut qa = self.qa.clone();
        qa.remove(number - 1);
        Ok(InterviewTranscript {
            subject_id: self.subject_id.clone(),
            qa,
        })
    }
}

/// Five short self-descriptive sentences treated as one subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaProfile {
    pub subject_id: String,
    sentences: Vec<String>,
}

impl PersonaProfile {
    pub fn new(
        subject_id: impl Into<String>,
        sentences: Vec<String>,
    ) -> Result<Self, SimError> {
        if sentences.len() != 5 {
            return Err(SimError::Profile(format!(
                "expected 5 sentences, got {}",
                sentences.len()
            )));
        }
        if let Some(i) = sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(SimError::Profile(format!("sentence {} is empty", i + 1)));
        }
        Ok(PersonaProfile {
            subject_id: subject_id.into(),
            sentences,
        })
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }
}

/// Five bipolar trait-adjective markers pinned at one intensity level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeProfile {
    pub subject_id: String,
    markers: Vec<(String, String)>,
    level: u8,
}

impl ShapeProfile {
    pub fn new(
        subject_id: impl Into<String>,
        markers: Vec<(String, String)>,
        level: u8,
    ) -> Result<Self, SimError> {
        if markers.len() != 5 {
            return Err(SimError::Profile(format!(
                "expected 5 adjective pairs, got {}",
                markers.len()
            )));
        }
        if let Some(i) = markers
            .iter()
            .position(|(low, high)| low.trim().is_empty() || high.trim().is_empty())
        {
            return Err(SimError::Profile(format!("marker {} has an empty adjective", i + 1)));
        }
        if !(1..=9).contains(&level) {
            return Err(SimError::Profile(format!("level {level} out of 1..=9")));
        }
        Ok(ShapeProfile {
            subject_id: subject_id.into(),
            markers,
            level,
        })
    }

    pub fn markers(&self) -> &[(String, String)] {
        &self.markers
    }

    pub fn level(&self) -> u8 {
        self.level
    }
}

/// Any of the three profile kinds, tagged with its method.
#[derive(Debug, Clone, PartialEq)]
pub enum SubjectProfile {
    Interview(InterviewTranscript),
    Persona(PersonaProfile),
    Shape(ShapeProfile),
}

impl SubjectProfile {
    pub fn subject_id(&self) -> &str {
        match self {
            SubjectProfile::Interview(t) => &t.subject_id,
            SubjectProfile::Persona(p) => &p.subject_id,
            SubjectProfile::Shape(s) => &s.subject_id,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            SubjectProfile::Interview(_) => Method::Psi,
            SubjectProfile::Persona(_) => Method::Persona,
            SubjectProfile::Shape(_) => Method::Shape,
        }
    }
}

/// Renders one shape marker at an intensity level per the nine-level
/// qualifier table.
fn shape_fragment(low: &str, high: &str, level: u8) -> String {
    match level {
        1 => format!("extremely {low}"),
        2 => format!("very {low}"),
        3 => low.to_string(),
        4 => format!("a bit {low}"),
        5 => format!("neither {low} nor {high}"),
        6 => format!("a bit {high}"),
        7 => high.to_string(),
        8 => format!("very {high}"),
        9 => format!("extremely {high}"),
        other => unreachable!("level {other} rejected at construction"),
    }
}

/// Renders the personality description `d` for a profile.
///
/// Interview: each pair becomes a "Q: {question}\nA: {answer}\n" block, in
/// order. Persona: the five sentences joined by single spaces. Shape:
/// "You are {m1}, {m2}, {m3}, {m4}, and {m5}." with each marker rendered at
/// the profile's level.
pub fn render_description(profile: &SubjectProfile) -> Result<String, SimError> {
    match profile {
        SubjectProfile::Interview(t) => {
            if t.qa.is_empty() {
                return Err(SimError::Profile("transcript has no pairs".into()));
            }
            let mut out = String::new();
            for pair in &t.qa {
                out.push_str("Q: ");
                out.push_str(&pair.question);
                out.push_str("\nA: ");
                out.push_str(&pair.answer);
                out.push('\n');
            }
            Ok(out)
        }
        SubjectProfile::Persona(p) => Ok(p.sentences.join(" ")),
        SubjectProfile::Shape(s) => {
            let rendered: Vec<String> = s
                .markers
                .iter()
                .map(|(low, high)| shape_fragment(low, high, s.level))
                .collect();
            Ok(format!(
                "You are {}, {}, {}, {}, and {}.",
                rendered[0], rendered[1], rendered[2], rendered[3], rendered[4]
            ))
        }
    }
}

/// An exact prompt string; equality is byte equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
}

/// The fixed prompt prefix preceding every personality description.
pub const BASE_TEMPLATE: &str = "For the following task, respond in a way that matches:";

const FIVE_POINT_INSTRUCTION: &str = "Indicate the extent to which you agree or disagree with \
the following statement using a 5-point Likert scale (1 = \"Strongly disagree\", 2 = \"Somewhat \
disagree\", 3 = \"Neither agree nor disagree\", 4 = \"Somewhat agree\", 5 = \"Strongly agree\").";

/// Builds the full per-item prompt: the base template, the description, a
/// rating instruction carrying the response anchors, the item statement, and
/// a single-number answer directive. The exact layout is frozen by golden
/// tests; identical inputs produce byte-identical output.
pub fn build_prompt(d: &str, item: &ItemDef, likert: &LikertScale) -> PromptText {
    debug_assert!(!d.is_empty(), "descriptions are validated upstream");
    let instruction = if likert.min == 1 && likert.max == 5 {
        FIVE_POINT_INSTRUCTION.to_string()
    } else {
        format!(
            "Indicate the extent to which you agree or disagree with the following statement \
using a Likert scale from {} to {}.",
            likert.min, likert.max
        )
    };
    PromptText {
        text: format!(
            "{BASE_TEMPLATE}\n{d}\n\n{instruction}\n\nStatement: {}\n\nAnswer with a single \
number from {} to {} and nothing else.",
            item.text, likert.min, likert.max
        ),
    }
}

/// Extracts the first standalone integer within the response range.
///
/// A standalone integer is a maximal digit run whose neighbors are not
/// alphanumeric, so "4.", "(3)", and "rating: 5" parse while "item4" does
/// not. In-range tokens win in reading order; out-of-range tokens are
/// skipped.
pub fn parse_likert_response(reply: &str, likert: &LikertScale) -> Result<i32, SimError> {
    let bytes = reply.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let standalone = (start == 0 || !bytes[start - 1].is_ascii_alphanumeric())
                && (i >= bytes.len() || !bytes[i].is_ascii_alphanumeric());
            if standalone && i - start <= 9 {
                let value: i32 = reply[start..i].parse().expect("digit run fits in i32");
                if value >= likert.min && value <= likert.max {
                    return Ok(value);
                }
            }
            // Skip trailing alphanumerics attached to a non-standalone run.
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    Err(SimError::Unparseable(reply.chars().take(120).collect()))
}

/// Retry behavior for transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            backoff: Duration::from_millis(250),
        }
    }
}

/// Batch-run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub method: Method,
    /// Sampling temperature passed through to the responder configuration.
    pub temperature: f64,
    /// Upper bound on concurrently outstanding requests.
    pub max_parallel: usize,
    pub retry: RetryPolicy,
}

impl SimulationConfig {
    pub fn new(method: Method) -> Self {
        SimulationConfig {
            method,
            temperature: 0.0,
            max_parallel: 4,
            retry: RetryPolicy::default(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(SimError::Config(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        if self.max_parallel == 0 {
            return Err(SimError::Config("max_parallel must be at least 1".into()));
        }
        Ok(())
    }
}

/// One cell that ended up missing, with the terminal error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub subject_id: String,
    pub item_id: u32,
    pub attempts: u32,
    pub error: String,
}

/// The assembled raw matrix plus the ledger of failed cells.
#[derive(Debug)]
pub struct SimulationOutcome {
    pub matrix: ResponseMatrix,
    pub failures: Vec<CellFailure>,
}

enum CellOutcome {
    Answer(i32),
    Failed { attempts: u32, error: String },
}

fn run_cell(
    prompt: &PromptText,
    likert: &LikertScale,
    retry: &RetryPolicy,
    responder: &dyn Responder,
) -> CellOutcome {
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        match responder.complete(prompt) {
            Ok(reply) => {
                return match parse_likert_response(&reply, likert) {
                    Ok(v) => CellOutcome::Answer(v),
                    Err(e) => CellOutcome::Failed {
                        attempts,
                        error: e.to_string(),
                    },
                }
            }
            Err(e) if e.is_retryable() && attempts <= retry.max_retries => {
                std::thread::sleep(retry.backoff * attempts);
            }
            Err(e) => {
                return CellOutcome::Failed {
                    attempts,
                    error: e.to_string(),
                }
            }
        }
    }
}

/// Administers every scale item to every profile through the responder and
/// assembles a raw (not yet reverse-coded) response matrix.
///
/// Issues exactly one request per (subject, item) cell, up to
/// `cfg.max_parallel` in flight at once when the responder allows
/// concurrency. Cells whose reply cannot be parsed, or whose request fails
/// after retries, become missing and are recorded in the failure ledger. If
/// every single cell fails the run itself fails with
/// [`SimError::Responder`], since that means the backend was never usable.
pub fn run_simulation(
    profiles: &[SubjectProfile],
    spec: &ScaleSpec,
    cfg: &SimulationConfig,
    responder: &dyn Responder,
) -> Result<SimulationOutcome, SimError> {
    cfg.validate()?;
    if profiles.is_empty() {
        return Err(SimError::Config("no profiles to simulate".into()));
    }
    for profile in profiles {
        if profile.method() != cfg.method {
            return Err(SimError::Config(format!(
                "profile {:?} does not match configured method {:?}",
                profile.subject_id(),
                cfg.method
            )));
        }
    }

    let descriptions: Vec<String> = profiles
        .iter()
        .map(render_description)
        .collect::<Result<_, _>>()?;
    let n = profiles.len();
    let p = spec.items.len();
    let mut prompts = Vec::with_capacity(n * p);
    for d in &descriptions {
        for item in &spec.items {
            prompts.push(build_prompt(d, item, &spec.likert));
        }
    }

    let outcomes: Vec<CellOutcome> = {
        let workers = if responder.concurrent_safe() {
            cfg.max_parallel.min(prompts.len()).max(1)
        } else {
            1
        };
        if workers == 1 {
            prompts
                .iter()
                .map(|prompt| run_cell(prompt, &spec.likert, &cfg.retry, responder))
                .collect()
        } else {
            let next_task = AtomicUsize::new(0);
            let collected: Mutex<Vec<(usize, CellOutcome)>> =
                Mutex::new(Vec::with_capacity(prompts.len()));
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let task = next_task.fetch_add(1, Ordering::Relaxed);
                            if task >= prompts.len() {
                                break;
                            }
                            local.push((
                                task,
                                run_cell(&prompts[task], &spec.likert, &cfg.retry, responder),
                            ));
                        }
                        collected.lock().expect("no panics hold this lock").extend(local);
                    });
                }
            });
            let mut indexed = collected.into_inner().expect("scope joined all workers");
            indexed.sort_by_key(|(task, _)| *task);
            indexed.into_iter().map(|(_, outcome)| outcome).collect()
        }
    };

    let mut values: Vec<Option<f64>> = Vec::with_capacity(n * p);
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            CellOutcome::Answer(v) => values.push(Some(f64::from(v))),
            CellOutcome::Failed { attempts, error } => {
                values.push(None);
                failures.push(CellFailure {
                    subject_id: profiles[idx / p].subject_id().to_string(),
                    item_id: spec.items[idx % p].id,
                    attempts,
                    error,
                });
            }
        }
    }
    if failures.len() == n * p {
        let sample = failures
            .first()
            .map(|f| f.error.clone())
            .unwrap_or_default();
        return Err(SimError::Responder(format!(
            "all {} requests failed; first error: {sample}",
            n * p
        )));
    }

    let matrix = ResponseMatrix::new(
        profiles.iter().map(|pr| pr.subject_id().to_string()).collect(),
        spec.items.iter().map(|it| it.id).collect(),
        values,
        Coding::Raw,
        &spec.likert,
    )
    .map_err(|e| SimError::Config(format!("assembled matrix rejected: {e}")))?;
    Ok(SimulationOutcome { matrix, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::bfi2;
    use std::sync::atomic::AtomicU32;

    fn persona_profile(id: &str) -> SubjectProfile {
        SubjectProfile::Persona(
            PersonaProfile::new(
                id,
                vec![
                    "I wear a lot of leather.".into(),
                    "I have boots I always wear.".into(),
                    "I sleep in late during the day.".into(),
                    "I listen to metal music.".into(),
                    "I have black spiky hair.".into(),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn persona_description_joins_sentences_with_spaces() {
        let d = render_description(&persona_profile("p1")).unwrap();
        assert_eq!(
            d,
            "I wear a lot of leather. I have boots I always wear. I sleep in late during the \
day. I listen to metal music. I have black spiky hair."
        );
    }

    #[test]
    fn shape_description_matches_published_example() {
        let profile = SubjectProfile::Shape(
            ShapeProfile::new(
                "s1",
                vec![
                    ("unfriendly".into(), "friendly".into()),
                    ("unenergetic".into(), "energetic".into()),
                    ("timid".into(), "assertive".into()),
                    ("unadventurous".into(), "bold".into()),
                    ("inactive".into(), "active".into()),
                ],
                9,
            )
            .unwrap(),
        );
        assert_eq!(
            render_description(&profile).unwrap(),
            "You are extremely friendly, extremely energetic, extremely assertive, extremely \
bold, and extremely active."
        );
    }

    #[test]
    fn shape_qualifiers_cover_all_nine_levels_distinctly() {
        let rendered: Vec<String> = (1..=9)
            .map(|level| shape_fragment("quiet", "talkative", level))
            .collect();
        assert_eq!(rendered[0], "extremely quiet");
        assert_eq!(rendered[1], "very quiet");
        assert_eq!(rendered[2], "quiet");
        assert_eq!(rendered[3], "a bit quiet");
        assert_eq!(rendered[4], "neither quiet nor talkative");
        assert_eq!(rendered[5], "a bit talkative");
        assert_eq!(rendered[6], "talkative");
        assert_eq!(rendered[7], "very talkative");
        assert_eq!(rendered[8], "extremely talkative");
        let unique: std::collections::HashSet<&String> = rendered.iter().collect();
        assert_eq!(unique.len(), 9);
    }

    #[test]
    fn interview_description_renders_qa_blocks() {
        let answers: Vec<String> = (1..=32).map(|i| format!("answer {i}")).collect();
        let t = InterviewTranscript::from_answers("x", answers).unwrap();
        let profile = SubjectProfile::Interview(t);
        let d = render_description(&profile).unwrap();
        assert!(d.starts_with(
            "Q: To get us started, where are you from? Where did you grow up and what was the \
place like?\nA: answer 1\n"
        ));
        assert_eq!(d.matches("Q: ").count(), 32);
        assert_eq!(d.matches("\nA: ").count(), 32);
        assert!(d.ends_with("How did you overcome that challenge?\nA: answer 32\n"));
    }

    #[test]
    fn transcript_constructors_enforce_pair_count() {
        let short: Vec<String> = (0..31).map(|i| format!("a{i}")).collect();
        assert_eq!(
            InterviewTranscript::from_answers("x", short).unwrap_err().name(),
            "ProfileError"
        );
        let t = InterviewTranscript::from_answers(
            "x",
            (0..32).map(|i| format!("a{i}")).collect(),
        )
        .unwrap();
        assert!(t.matches_canonical());
        let dropped = t.drop_question(16).unwrap();
        assert_eq!(dropped.qa().len(), 31);
        assert!(!dropped.matches_canonical());
        assert!(dropped.qa().iter().all(|p| !p.question.contains("first paid job")));
        assert!(t.drop_question(0).is_err());
        assert!(t.drop_question(33).is_err());
    }

    #[test]
    fn prompt_starts_with_base_template_and_is_deterministic() {
        let spec = bfi2();
        let item = spec.item(1).unwrap();
        let d = render_description(&persona_profile("p")).unwrap();
        let a = build_prompt(&d, item, &spec.likert);
        let b = build_prompt(&d, item, &spec.likert);
        assert_eq!(a, b);
        assert!(a.text.starts_with("For the following task, respond in a way that matches:"));
        assert!(a.text.contains("1 = \"Strongly disagree\""));
        assert!(a.text.contains("5 = \"Strongly agree\""));
        assert!(a.text.contains("Statement: I am someone who is outgoing, sociable."));
    }

    #[test]
    fn prompt_generic_anchor_fallback_for_other_ranges() {
        let likert = LikertScale::new(1, 7).unwrap();
        let item = ItemDef {
            id: 1,
            text: "I like tests.".into(),
            reverse: false,
        };
        let prompt = build_prompt("desc", &item, &likert);
        assert!(prompt.text.contains("from 1 to 7"));
        assert!(!prompt.text.contains("Strongly disagree"));
    }

    #[test]
    fn parse_accepts_standalone_in_range_integers() {
        let likert = LikertScale::new(1, 5).unwrap();
        assert_eq!(parse_likert_response("4", &likert).unwrap(), 4);
        assert_eq!(parse_likert_response("  3.", &likert).unwrap(), 3);
        assert_eq!(
            parse_likert_response("I would say 3 (neither agree nor disagree).", &likert).unwrap(),
            3
        );
        assert_eq!(parse_likert_response("(5)", &likert).unwrap(), 5);
        assert_eq!(parse_likert_response("Rating: 2/5", &likert).unwrap(), 2);
    }

    #[test]
    fn parse_skips_attached_and_out_of_range_tokens() {
        let likert = LikertScale::new(1, 5).unwrap();
        // "item4" is attached; the later standalone 2 wins.
        assert_eq!(parse_likert_response("item4 scored 2", &likert).unwrap(), 2);
        // 42 is standalone but out of range; 5 wins.
        assert_eq!(parse_likert_response("42 then 5", &likert).unwrap(), 5);
        assert_eq!(
            parse_likert_response("strongly agree", &likert).unwrap_err().name(),
            "UnparseableResponseError"
        );
        assert_eq!(
            parse_likert_response("answer is 9", &likert).unwrap_err().name(),
            "UnparseableResponseError"
        );
    }

    struct ConstantResponder(&'static str);

    impl Responder for ConstantResponder {
        fn complete(&self, _prompt: &PromptText) -> Result<String, ResponderError> {
            Ok(self.0.to_string())
        }
    }

    struct CountingResponder {
        inner: MockResponder,
        calls: AtomicU32,
    }

    impl Responder for CountingResponder {
        fn complete(&self, prompt: &PromptText) -> Result<String, ResponderError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.complete(prompt)
        }
    }

    #[test]
    fn constant_responder_fills_every_cell() {
        let spec = bfi2();
        let profiles: Vec<SubjectProfile> =
            (0..3).map(|i| persona_profile(&format!("p{i}"))).collect();
        let cfg = SimulationConfig::new(Method::Persona);
        let outcome = run_simulation(&profiles, spec, &cfg, &ConstantResponder("3")).unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(outcome.matrix.coding(), Coding::Raw);
        assert_eq!(outcome.matrix.n_subjects(), 3);
        assert_eq!(outcome.matrix.n_items(), 60);
        for r in 0..3 {
            for c in 0..60 {
                assert_eq!(outcome.matrix.value(r, c), Some(3.0));
            }
        }
    }

    #[test]
    fn mock_runs_are_deterministic_and_counted() {
        let spec = bfi2();
        let profiles: Vec<SubjectProfile> =
            (0..3).map(|i| persona_profile(&format!("p{i}"))).collect();
        let mut cfg = SimulationConfig::new(Method::Persona);
        cfg.max_parallel = 4;
        let counting = CountingResponder {
            inner: MockResponder::new(99),
            calls: AtomicU32::new(0),
        };
        let first = run_simulation(&profiles, spec, &cfg, &counting).unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed), 3 * 60);
        let second = run_simulation(&profiles, spec, &cfg, &counting).unwrap();
        assert_eq!(first.matrix, second.matrix);
        // Sequential execution must agree with the parallel run.
        cfg.max_parallel = 1;
        let sequential = run_simulation(&profiles, spec, &cfg, &counting).unwrap();
        assert_eq!(first.matrix, sequential.matrix);
    }

    #[test]
    fn permuting_profiles_permutes_rows_only() {
        let spec = bfi2();
        let profiles: Vec<SubjectProfile> =
            (0..4).map(|i| persona_with_index(i)).collect();
        let cfg = SimulationConfig::new(Method::Persona);
        let mock = MockResponder::new(7);
        let forward = run_simulation(&profiles, spec, &cfg, &mock).unwrap();
        let reversed_profiles: Vec<SubjectProfile> = profiles.iter().rev().cloned().collect();
        let backward = run_simulation(&reversed_profiles, spec, &cfg, &mock).unwrap();
        for r in 0..4 {
            let mirrored = 3 - r;
            assert_eq!(
                forward.matrix.subject_ids()[r],
                backward.matrix.subject_ids()[mirrored]
            );
            for c in 0..60 {
                assert_eq!(forward.matrix.value(r, c), backward.matrix.value(mirrored, c));
            }
        }
    }

    fn persona_with_index(i: usize) -> SubjectProfile {
        SubjectProfile::Persona(
            PersonaProfile::new(
                format!("subject-{i}"),
                vec![
                    format!("I am subject number {i}."),
                    "I enjoy long walks.".into(),
                    "I collect stamps.".into(),
                    "I cook on weekends.".into(),
                    "I read before bed.".into(),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn unparseable_replies_become_missing_cells_with_ledger_entries() {
        struct FlakyParse;
        impl Responder for FlakyParse {
            fn complete(&self, prompt: &PromptText) -> Result<String, ResponderError> {
                if prompt.text.contains("Statement: I am someone who is outgoing, sociable.") {
                    Ok("no idea".into())
                } else {
                    Ok("4".into())
                }
            }
        }
        let spec = bfi2();
        let profiles = vec![persona_profile("p0")];
        let cfg = SimulationConfig::new(Method::Persona);
        let outcome = run_simulation(&profiles, spec, &cfg, &FlakyParse).unwrap();
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].item_id, 1);
        assert_eq!(outcome.failures[0].subject_id, "p0");
        assert_eq!(outcome.matrix.value(0, 0), None);
        assert_eq!(outcome.matrix.value(0, 1), Some(4.0));
        assert_eq!(outcome.matrix.missing_count(), 1);
    }

    #[test]
    fn transport_failures_are_retried_then_recorded() {
        struct FailTwice {
            calls: AtomicU32,
        }
        impl Responder for FailTwice {
            fn complete(&self, _prompt: &PromptText) -> Result<String, ResponderError> {
                let n = self.calls.fetch_add(1, Ordering::Relaxed);
                if n % 3 < 2 {
                    Err(ResponderError::Transport("connection reset".into()))
                } else {
                    Ok("2".into())
                }
            }
        }
        let spec = bfi2();
        let profiles = vec![persona_profile("p0")];
        let mut cfg = SimulationConfig::new(Method::Persona);
        cfg.max_parallel = 1;
        cfg.retry.backoff = Duration::from_millis(0);
        let responder = FailTwice { calls: AtomicU32::new(0) };
        // Every cell fails twice then succeeds, within the 2-retry budget.
        let outcome = run_simulation(&profiles, spec, &cfg, &responder).unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(responder.calls.load(Ordering::Relaxed), 60 * 3);
    }

    #[test]
    fn totally_dead_backend_fails_the_run() {
        struct Dead;
        impl Responder for Dead {
            fn complete(&self, _prompt: &PromptText) -> Result<String, ResponderError> {
                Err(ResponderError::Transport("refused".into()))
            }
        }
        let spec = bfi2();
        let profiles = vec![persona_profile("p0")];
        let mut cfg = SimulationConfig::new(Method::Persona);
        cfg.retry.backoff = Duration::from_millis(0);
        let err = run_simulation(&profiles, spec, &cfg, &Dead).unwrap_err();
        assert_eq!(err.name(), "ResponderError");
    }

    #[test]
    fn method_mismatch_and_bad_config_are_rejected() {
        let spec = bfi2();
        let profiles = vec![persona_profile("p0")];
        let cfg = SimulationConfig::new(Method::Psi);
        assert_eq!(
            run_simulation(&profiles, spec, &cfg, &ConstantResponder("3"))
                .unwrap_err()
                .name(),
            "ConfigError"
        );
        let mut bad = SimulationConfig::new(Method::Persona);
        bad.max_parallel = 0;
        assert_eq!(
            run_simulation(&profiles, spec, &bad, &ConstantResponder("3"))
                .unwrap_err()
                .name(),
            "ConfigError"
        );
        let mut negative = SimulationConfig::new(Method::Persona);
        negative.temperature = -0.5;
        assert_eq!(
            run_simulation(&profiles, spec, &negative, &ConstantResponder("3"))
                .unwrap_err()
                .name(),
            "ConfigError"
        );
    }
}
