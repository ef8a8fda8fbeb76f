//! CSV ingestion for response matrices, interview transcripts, persona and
//! shape profiles, and criterion scales, plus a writer for simulated
//! responses.
//!
//! Column conventions:
//! * responses: optional `subject_id` column, one `Item{id}` column per
//!   scale item; blank cells and `NA` (any case) are missing
//! * transcripts: optional `subject_id`, `Q1`..`Q32`
//! * personas: optional `subject_id`, `S1`..`S5`
//! * shapes: optional `subject_id`, `Low1`..`Low5`, `High1`..`High5`,
//!   `Level`
//! * criterion: optional `subject_id`, `{name}1`..`{name}N` (for example
//!   `OCB1`..`OCB10`)
//!
//! Unrecognized columns are ignored everywhere.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::criterion::CriterionSpec;
use crate::scale::{
    parse_scale_spec, Coding, ResponseMatrix, ScaleError, ScaleSpec,
};
use crate::sim::{
    InterviewTranscript, PersonaProfile, ShapeProfile, SimError, CANONICAL_QUESTIONS,
};

/// Errors from reading or writing the CSV formats.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing column {0}")]
    Header(String),
    #[error("row {row}, column {column}: cannot parse {text:?} as a number")]
    Value {
        row: usize,
        column: String,
        text: String,
    },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl IngestError {
    /// Stable error-kind name used for CLI output.
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::Csv(_) => "CsvError",
            IngestError::Io(_) => "IoError",
            IngestError::Header(_) => "HeaderError",
            IngestError::Value { .. } => "ValueError",
            IngestError::Scale(e) => e.name(),
            IngestError::Sim(e) => e.name(),
        }
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(reader: impl Read) -> Result<Self, IngestError> {
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn required(&self, name: &str) -> Result<usize, IngestError> {
        self.column(name)
            .ok_or_else(|| IngestError::Header(name.to_string()))
    }

    fn subject_ids(&self) -> Vec<String> {
        let id_col = self
            .headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case("subject_id") || h.eq_ignore_ascii_case("id"));
        match id_col {
            Some(col) => self.rows.iter().map(|r| r[col].clone()).collect(),
            None => (1..=self.rows.len()).map(|i| format!("subject{i}")).collect(),
        }
    }

    fn cell(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).map(String::as_str).unwrap_or("")
    }
}

fn is_missing(text: &str) -> bool {
    text.is_empty() || text.eq_ignore_ascii_case("na")
}

fn parse_cell(text: &str, row: usize, column: &str) -> Result<Option<f64>, IngestError> {
    if is_missing(text) {
        return Ok(None);
    }
    text.parse::<f64>()
        .map(Some)
        .map_err(|_| IngestError::Value {
            row: row + 1,
            column: column.to_string(),
            text: text.to_string(),
        })
}

/// Reads a response matrix whose columns follow the scale's item ids.
/// `coding` declares whether the file already has reverse coding applied.
pub fn load_responses(
    reader: impl Read,
    spec: &ScaleSpec,
    coding: Coding,
) -> Result<ResponseMatrix, IngestError> {
    let table = Table::read(reader)?;
    let item_ids = spec.item_ids();
    let mut columns = Vec::with_capacity(item_ids.len());
    for &id in &item_ids {
        columns.push(table.required(&format!("Item{id}"))?);
    }
    let mut values = Vec::with_capacity(table.rows.len() * item_ids.len());
    for row in 0..table.rows.len() {
        for (&col, &id) in columns.iter().zip(&item_ids) {
            values.push(parse_cell(table.cell(row, col), row, &format!("Item{id}"))?);
        }
    }
    Ok(ResponseMatrix::new(
        table.subject_ids(),
        item_ids,
        values,
        coding,
        &spec.likert,
    )?)
}

/// Reads a criterion response matrix with `{name}1`..`{name}N` columns.
pub fn load_criterion(
    reader: impl Read,
    spec: &CriterionSpec,
) -> Result<ResponseMatrix, IngestError> {
    let table = Table::read(reader)?;
    let mut columns = Vec::with_capacity(spec.item_ids.len());
    for &id in &spec.item_ids {
        columns.push(table.required(&format!("{}{id}", spec.name))?);
    }
    let mut values = Vec::with_capacity(table.rows.len() * spec.item_ids.len());
    for row in 0..table.rows.len() {
        for (&col, &id) in columns.iter().zip(&spec.item_ids) {
            let label = format!("{}{id}", spec.name);
            values.push(parse_cell(table.cell(row, col), row, &label)?);
        }
    }
    Ok(ResponseMatrix::new(
        table.subject_ids(),
        spec.item_ids.clone(),
        values,
        Coding::Raw,
        &spec.likert,
    )?)
}

/// Reads interview transcripts: one row per subject, `Q1`..`Q32` answers to
/// the canonical questions.
pub fn load_transcripts(reader: impl Read) -> Result<Vec<InterviewTranscript>, IngestError> {
    let table = Table::read(reader)?;
    let n_questions = CANONICAL_QUESTIONS.len();
    let mut columns = Vec::with_capacity(n_questions);
    for q in 1..=n_questions {
        columns.push(table.required(&format!("Q{q}"))?);
    }
    let ids = table.subject_ids();
    let mut out = Vec::with_capacity(table.rows.len());
    for (row, id) in ids.into_iter().enumerate() {
        let answers: Vec<String> = columns
            .iter()
            .map(|&c| table.cell(row, c).to_string())
            .collect();
        out.push(InterviewTranscript::from_answers(id, answers)?);
    }
    Ok(out)
}

/// Reads persona profiles: one row per subject, five sentences `S1`..`S5`.
pub fn load_personas(reader: impl Read) -> Result<Vec<PersonaProfile>, IngestError> {
    let table = Table::read(reader)?;
    let mut columns = Vec::with_capacity(5);
    for s in 1..=5 {
        columns.push(table.required(&format!("S{s}"))?);
    }
    let ids = table.subject_ids();
    let mut out = Vec::with_capacity(table.rows.len());
    for (row, id) in ids.into_iter().enumerate() {
        let sentences: Vec<String> = columns
            .iter()
            .map(|&c| table.cell(row, c).to_string())
            .collect();
        out.push(PersonaProfile::new(id, sentences)?);
    }
    Ok(out)
}

/// Reads shape profiles: five trait marker pairs `Low1`/`High1` ..
/// `Low5`/`High5` and a qualifier `Level` in 1..=9.
pub fn load_shapes(reader: impl Read) -> Result<Vec<ShapeProfile>, IngestError> {
    let table = Table::read(reader)?;
    let mut pairs = Vec::with_capacity(5);
    for k in 1..=5 {
        let low = table.required(&format!("Low{k}"))?;
        let high = table.required(&format!("High{k}"))?;
        pairs.push((low, high));
    }
    let level_col = table.required("Level")?;
    let ids = table.subject_ids();
    let mut out = Vec::with_capacity(table.rows.len());
    for (row, id) in ids.into_iter().enumerate() {
        let markers: Vec<(String, String)> = pairs
            .iter()
            .map(|&(lo, hi)| (table.cell(row, lo).to_string(), table.cell(row, hi).to_string()))
            .collect();
        let level_text = table.cell(row, level_col);
        let level: u8 = level_text.parse().map_err(|_| IngestError::Value {
            row: row + 1,
            column: "Level".into(),
            text: level_text.to_string(),
        })?;
        out.push(ShapeProfile::new(id, markers, level)?);
    }
    Ok(out)
}

/// Reads a scale definition from its JSON file.
pub fn load_scale_spec(path: &Path) -> Result<ScaleSpec, IngestError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_scale_spec(&text)?)
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Writes a response matrix in the same layout [`load_responses`] reads:
/// `subject_id` plus one `Item{id}` column per item, missing cells as `NA`.
pub fn write_responses(
    writer: impl std::io::Write,
    matrix: &ResponseMatrix,
) -> Result<(), IngestError> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["subject_id".to_string()];
    header.extend(matrix.item_ids().iter().map(|id| format!("Item{id}")));
    csv.write_record(&header)?;
    for row in 0..matrix.n_subjects() {
        let mut record = vec![matrix.subject_ids()[row].clone()];
        for col in 0..matrix.n_items() {
            record.push(match matrix.value(row, col) {
                Some(v) => format_value(v),
                None => "NA".to_string(),
            });
        }
        csv.write_record(&record)?;
    }
    csv.flush().map_err(IngestError::Io)?;
    Ok(())
}

/// Path-based convenience wrappers.
pub fn load_responses_path(
    path: &Path,
    spec: &ScaleSpec,
    coding: Coding,
) -> Result<ResponseMatrix, IngestError> {
    load_responses(File::open(path)?, spec, coding)
}

pub fn load_criterion_path(
    path: &Path,
    spec: &CriterionSpec,
) -> Result<ResponseMatrix, IngestError> {
    load_criterion(File::open(path)?, spec)
}

pub fn load_transcripts_path(path: &Path) -> Result<Vec<InterviewTranscript>, IngestError> {
    load_transcripts(File::open(path)?)
}

pub fn load_personas_path(path: &Path) -> Result<Vec<PersonaProfile>, IngestError> {
    load_personas(File::open(path)?)
}

pub fn load_shapes_path(path: &Path) -> Result<Vec<ShapeProfile>, IngestError> {
    load_shapes(File::open(path)?)
}

pub fn write_responses_path(path: &Path, matrix: &ResponseMatrix) -> Result<(), IngestError> {
    write_responses(File::create(path)?, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::bfi2;

    fn response_csv(n_subjects: usize) -> String {
        let spec = bfi2();
        let mut out = String::from("subject_id");
        for id in spec.item_ids() {
            out.push_str(&format!(",Item{id}"));
        }
        out.push('\n');
        for s in 0..n_subjects {
            out.push_str(&format!("p{s}"));
            for (k, _) in spec.item_ids().iter().enumerate() {
                out.push_str(&format!(",{}", 1 + (s * 13 + k * 7) % 5));
            }
            out.push('\n');
        }
        out
    }

    #[test]
    fn responses_round_trip_through_csv() {
        let spec = bfi2();
        let matrix = load_responses(response_csv(4).as_bytes(), spec, Coding::Raw).unwrap();
        assert_eq!(matrix.n_subjects(), 4);
        assert_eq!(matrix.n_items(), 60);
        assert_eq!(matrix.subject_ids()[2], "p2");

        let mut buffer = Vec::new();
        write_responses(&mut buffer, &matrix).unwrap();
        let again = load_responses(buffer.as_slice(), spec, Coding::ReverseApplied).unwrap();
        assert_eq!(again.coding(), Coding::ReverseApplied);
        let again = load_responses(buffer.as_slice(), spec, Coding::Raw).unwrap();
        assert_eq!(matrix, again);
    }

    #[test]
    fn shuffled_and_extra_columns_are_handled() {
        // Item columns out of order plus an ignored column; no subject_id.
        let csv = {
            let spec = bfi2();
            let mut ids = spec.item_ids();
            ids.reverse();
            let mut out = String::from("note");
            for id in &ids {
                out.push_str(&format!(",Item{id}"));
            }
            out.push_str("\nhello");
            for id in &ids {
                out.push_str(&format!(",{}", 1 + (*id as usize % 5)));
            }
            out.push('\n');
            out
        };
        let matrix = load_responses(csv.as_bytes(), bfi2(), Coding::Raw).unwrap();
        assert_eq!(matrix.subject_ids(), &["subject1".to_string()]);
        // Column order in the matrix follows the scale, not the file.
        let col = matrix.column_of(1).unwrap();
        assert_eq!(matrix.value(0, col), Some(2.0));
        let col60 = matrix.column_of(60).unwrap();
        assert_eq!(matrix.value(0, col60), Some(1.0));
    }

    #[test]
    fn missing_tokens_and_bad_numbers() {
        let mut csv = response_csv(2);
        csv = csv.replacen(",3", ",NA", 1);
        let matrix = load_responses(csv.as_bytes(), bfi2(), Coding::Raw).unwrap();
        assert_eq!(matrix.missing_count(), 1);

        let bad = response_csv(1).replacen(",2", ",often", 1);
        let err = load_responses(bad.as_bytes(), bfi2(), Coding::Raw).unwrap_err();
        assert_eq!(err.name(), "ValueError");

        let no_col = response_csv(1).replacen("Item7,", "砖7,", 1);
        let err = load_responses(no_col.as_bytes(), bfi2(), Coding::Raw).unwrap_err();
        assert_eq!(err.name(), "HeaderError");
        assert!(err.to_string().contains("Item7"));
    }

    #[test]
    fn out_of_range_value_is_reported() {
        let csv = response_csv(1).replacen(",4", ",6", 1);
        let err = load_responses(csv.as_bytes(), bfi2(), Coding::Raw).unwrap_err();
        assert_eq!(err.name(), "RangeError");
    }

    #[test]
    fn transcripts_personas_and_shapes_parse() {
        let mut csv = String::from("subject_id");
        for q in 1..=32 {
            csv.push_str(&format!(",Q{q}"));
        }
        csv.push('\n');
        csv.push_str("alpha");
        for q in 1..=32 {
            csv.push_str(&format!(",answer {q}"));
        }
        csv.push('\n');
        let transcripts = load_transcripts(csv.as_bytes()).unwrap();
        assert_eq!(transcripts.len(), 1);
        assert_eq!(transcripts[0].subject_id, "alpha");
        assert!(transcripts[0].matches_canonical());
        assert_eq!(transcripts[0].qa()[31].answer, "answer 32");

        let personas = load_personas(
            "subject_id,S1,S2,S3,S4,S5\nv,I am quiet.,I plan.,I trust.,I read.,I paint.\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(personas[0].sentences()[4], "I paint.");

        let shapes = load_shapes(
            "subject_id,Low1,High1,Low2,High2,Low3,High3,Low4,High4,Low5,High5,Level\n\
             w,introverted,extraverted,critical,agreeable,careless,conscientious,\
             calm,neurotic,closed,open,9\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(shapes[0].level(), 9);
        assert_eq!(shapes[0].markers()[0].1, "extraverted");

        let err = load_shapes(
            "Low1,High1,Low2,High2,Low3,High3,Low4,High4,Low5,High5,Level\n\
             a,b,c,d,e,f,g,h,i,j,12\n"
                .as_bytes(),
        )
        .unwrap_err();
        assert_eq!(err.name(), "ProfileError");
    }

    #[test]
    fn criterion_csv_parses_with_named_columns() {
        let spec = CriterionSpec::ocb();
        let mut csv = String::from("subject_id");
        for k in 1..=10 {
            csv.push_str(&format!(",OCB{k}"));
        }
        csv.push_str("\nx1");
        for k in 1..=10 {
            csv.push_str(&format!(",{}", 1 + k % 5));
        }
        csv.push('\n');
        let matrix = load_criterion(csv.as_bytes(), &spec).unwrap();
        assert_eq!(matrix.n_items(), 10);
        let missing = load_criterion(csv.replace("OCB10", "XXX").as_bytes(), &spec).unwrap_err();
        assert_eq!(missing.name(), "HeaderError");
    }
}
