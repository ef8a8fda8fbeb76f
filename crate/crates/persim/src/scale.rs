//! Hierarchical Likert scale definitions, response matrices, reverse coding,
//! and facet/domain scoring.
//!
//! A scale is a three-level hierarchy: items belong to exactly one facet,
//! facets belong to exactly one domain. Scoring averages reverse-coded item
//! responses into facet scores and domain scores. The BFI-2 instrument (60
//! items, 15 facets, 5 domains) ships as a bundled asset via [`bfi2`].

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from scale parsing, response validation, and scoring.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown reference: {0}")]
    Reference(String),
    #[error("duplicate identifier: {0}")]
    DuplicateId(String),
    #[error("value {value} out of range [{min}, {max}] at row {row}, item {item}")]
    Range {
        row: usize,
        item: u32,
        value: f64,
        min: i32,
        max: i32,
    },
    #[error("reverse coding already applied")]
    AlreadyCoded,
    #[error("coding mismatch: {0}")]
    Coding(String),
    #[error("no subjects remain after missing-data deletion")]
    EmptyAfterDeletion,
}

impl ScaleError {
    /// Stable error-kind name used for CLI output and report annotations.
    pub fn name(&self) -> &'static str {
        match self {
            ScaleError::Schema(_) => "SchemaError",
            ScaleError::Reference(_) => "ReferenceError",
            ScaleError::DuplicateId(_) => "DuplicateIdError",
            ScaleError::Range { .. } => "RangeError",
            ScaleError::AlreadyCoded => "AlreadyCodedError",
            ScaleError::Coding(_) => "CodingError",
            ScaleError::EmptyAfterDeletion => "EmptyAfterDeletionError",
        }
    }
}

/// Closed integer response range of a Likert instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min: i32,
    pub max: i32,
}

impl LikertScale {
    pub fn new(min: i32, max: i32) -> Result<Self, ScaleError> {
        if min <= 0 || min >= max {
            return Err(ScaleError::Schema(format!(
                "likert range must satisfy 0 < min < max, got [{min}, {max}]"
            )));
        }
        Ok(LikertScale { min, max })
    }

    /// Reflects a response across the midpoint: min + max - value.
    pub fn reverse(&self, value: f64) -> Result<f64, ScaleError> {
        if !self.contains(value) {
            return Err(ScaleError::Range {
                row: 0,
                item: 0,
                value,
                min: self.min,
                max: self.max,
            });
        }
        Ok(f64::from(self.min) + f64::from(self.max) - value)
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= f64::from(self.min) && value <= f64::from(self.max)
    }
}

/// A single scale item: numeric id, statement text, and reverse-key flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDef {
    pub id: u32,
    pub text: String,
    pub reverse: bool,
}

/// A facet: a named group of item ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetDef {
    pub name: String,
    pub item_ids: Vec<u32>,
}

/// A domain: a named group of facets, with the item-id union precomputed in
/// ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub facet_names: Vec<String>,
    pub item_ids: Vec<u32>,
}

/// A validated hierarchical scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpec {
    pub name: String,
    pub version: Option<String>,
    pub likert: LikertScale,
    pub items: Vec<ItemDef>,
    pub facets: Vec<FacetDef>,
    pub domains: Vec<DomainDef>,
    item_index: HashMap<u32, usize>,
    facet_index: HashMap<String, usize>,
}

impl ScaleSpec {
    pub fn item(&self, id: u32) -> Option<&ItemDef> {
        self.item_index.get(&id).map(|&i| &self.items[i])
    }

    pub fn facet(&self, name: &str) -> Option<&FacetDef> {
        self.facet_index.get(name).map(|&i| &self.facets[i])
    }

    pub fn domain(&self, name: &str) -> Option<&DomainDef> {
        self.domains.iter().find(|d| d.name == name)
    }

    /// Item ids in scale order.
    pub fn item_ids(&self) -> Vec<u32> {
        self.items.iter().map(|it| it.id).collect()
    }

    pub fn reverse_item_ids(&self) -> Vec<u32> {
        self.items.iter().filter(|it| it.reverse).map(|it| it.id).collect()
    }
}

#[derive(Deserialize)]
struct RawLikert {
    min: i32,
    max: i32,
}

#[derive(Deserialize)]
struct RawFacet {
    name: String,
    items: Vec<u32>,
}

#[derive(Deserialize)]
struct RawDomain {
    name: String,
    facets: Vec<String>,
}

#[derive(Deserialize)]
struct RawScale {
    name: String,
    #[serde(default)]
    version: Option<String>,
    likert: RawLikert,
    items: Vec<ItemDef>,
    facets: Vec<RawFacet>,
    domains: Vec<RawDomain>,
}

/// Parses and validates a scale definition from its JSON document.
///
/// Validation enforces: a well-formed likert range, non-empty item texts,
/// unique item ids / facet names / domain names, facet and domain references
/// that resolve, and membership of every item in exactly one facet and every
/// facet in exactly one domain.
pub fn parse_scale_spec(doc: &str) -> Result<ScaleSpec, ScaleError> {
    let raw: RawScale =
        serde_json::from_str(doc).map_err(|e| ScaleError::Schema(e.to_string()))?;
    let likert = LikertScale::new(raw.likert.min, raw.likert.max)?;
    if raw.name.is_empty() {
        return Err(ScaleError::Schema("scale name is empty".into()));
    }
    if raw.items.is_empty() {
        return Err(ScaleError::Schema("scale has no items".into()));
    }

    let mut item_index = HashMap::new();
    for (i, item) in raw.items.iter().enumerate() {
        if item.text.trim().is_empty() {
            return Err(ScaleError::Schema(format!("item {} has empty text", item.id)));
        }
        if item_index.insert(item.id, i).is_some() {
            return Err(ScaleError::DuplicateId(format!("item id {}", item.id)));
        }
    }

    let mut facet_index = HashMap::new();
    let mut facets = Vec::with_capacity(raw.facets.len());
    let mut item_owner: HashMap<u32, &str> = HashMap::new();
    for (i, f) in raw.facets.iter().enumerate() {
        if facet_index.insert(f.name.clone(), i).is_some() {
            return Err(ScaleError::DuplicateId(format!("facet name {:?}", f.name)));
        }
        if f.items.is_empty() {
            return Err(ScaleError::Schema(format!("facet {:?} has no items", f.name)));
        }
        let mut seen = HashSet::new();
        for &id in &f.items {
            if !item_index.contains_key(&id) {
                return Err(ScaleError::Reference(format!(
                    "facet {:?} references unknown item id {id}",
                    f.name
                )));
            }
            if !seen.insert(id) {
                return Err(ScaleError::DuplicateId(format!(
                    "item id {id} listed twice in facet {:?}",
                    f.name
                )));
            }
            if let Some(owner) = item_owner.insert(id, &f.name) {
                return Err(ScaleError::Schema(format!(
                    "item {id} belongs to both facet {owner:?} and facet {:?}",
                    f.name
                )));
            }
        }
        facets.push(FacetDef {
            name: f.name.clone(),
            item_ids: f.items.clone(),
        });
    }
    for item in &raw.items {
        if !item_owner.contains_key(&item.id) {
            return Err(ScaleError::Schema(format!(
                "item {} belongs to no facet",
                item.id
            )));
        }
    }

    let mut domain_names = HashSet::new();
    let mut facet_owner: HashMap<&str, &str> = HashMap::new();
    let mut domains = Vec::with_capacity(raw.domains.len());
    for d in &raw.domains {
        if !domain_names.insert(d.name.clone()) {
            return Err(ScaleError::DuplicateId(format!("domain name {:?}", d.name)));
        }
        if d.facets.is_empty() {
            return Err(ScaleError::Schema(format!("domain {:?} has no facets", d.name)));
        }
        let mut item_ids = Vec::new();
        for fname in &d.facets {
            let &fi = facet_index
                .get(fname)
                .ok_or_else(|| ScaleError::Reference(format!(
                    "domain {:?} references unknown facet {fname:?}",
                    d.name
                )))?;
            if let Some(owner) = facet_owner.insert(fname, &d.name) {
                return Err(ScaleError::Schema(format!(
                    "facet {fname:?} belongs to both domain {owner:?} and domain {:?}",
                    d.name
                )));
            }
            item_ids.extend_from_slice(&facets[fi].item_ids);
        }
        item_ids.sort_unstable();
        domains.push(DomainDef {
            name: d.name.clone(),
            facet_names: d.facets.clone(),
            item_ids,
        });
    }
    for f in &facets {
        if !facet_owner.contains_key(f.name.as_str()) {
            return Err(ScaleError::Schema(format!(
                "facet {:?} belongs to no domain",
                f.name
            )));
        }
    }

    Ok(ScaleSpec {
        name: raw.name,
        version: raw.version,
        likert,
        items: raw.items,
        facets,
        domains,
        item_index,
        facet_index,
    })
}

static BFI2: OnceLock<ScaleSpec> = OnceLock::new();

/// The bundled BFI-2 definition: 60 items, 15 facets of 4 items, 5 domains of
/// 3 facets, 30 reverse-keyed items, 5-point response range.
pub fn bfi2() -> &'static ScaleSpec {
    BFI2.get_or_init(|| {
        parse_scale_spec(include_str!("../assets/bfi2.json"))
            .expect("bundled BFI-2 asset is valid")
    })
}

/// Whether raw responses still need reverse coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    Raw,
    ReverseApplied,
}

/// A subjects x items grid of Likert responses with explicit missing cells.
///
/// Values are stored row-major; `None` marks a missing response. Present
/// values are validated against the scale range at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    subject_ids: Vec<String>,
    item_ids: Vec<u32>,
    values: Vec<Option<f64>>,
    coding: Coding,
}

impl ResponseMatrix {
    pub fn new(
        subject_ids: Vec<String>,
        item_ids: Vec<u32>,
        values: Vec<Option<f64>>,
        coding: Coding,
        likert: &LikertScale,
    ) -> Result<Self, ScaleError> {
        let n = subject_ids.len();
        let p = item_ids.len();
        if values.len() != n * p {
            return Err(ScaleError::Schema(format!(
                "value buffer has {} cells, expected {} ({} subjects x {} items)",
                values.len(),
                n * p,
                n,
                p
            )));
        }
        let mut seen = HashSet::new();
        for &id in &item_ids {
            if !seen.insert(id) {
                return Err(ScaleError::DuplicateId(format!("item id {id}")));
            }
        }
        for (idx, cell) in values.iter().enumerate() {
            if let Some(v) = *cell {
                if !likert.contains(v) {
                    return Err(ScaleError::Range {
                        row: idx / p,
                        item: item_ids[idx % p],
                        value: v,
                        min: likert.min,
                        max: likert.max,
                    });
                }
            }
        }
        Ok(ResponseMatrix {
            subject_ids,
            item_ids,
            values,
            coding,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn item_ids(&self) -> &[u32] {
        &self.item_ids
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.item_ids.len() + col]
    }

    pub fn column_of(&self, item_id: u32) -> Option<usize> {
        self.item_ids.iter().position(|&id| id == item_id)
    }

    /// Count of missing cells across the whole grid.
    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Applies reverse coding to every reverse-keyed column of a raw matrix.
///
/// Reflection is min + max - value, an involution: applying it twice to the
/// reverse-keyed columns restores the original matrix. Missing cells stay
/// missing. Fails with [`ScaleError::AlreadyCoded`] if the matrix is already
/// reverse coded.
pub fn apply_reverse_coding(
    matrix: &ResponseMatrix,
    spec: &ScaleSpec,
) -> Result<ResponseMatrix, ScaleError> {
    if matrix.coding == Coding::ReverseApplied {
        return Err(ScaleError::AlreadyCoded);
    }
    let p = matrix.item_ids.len();
    let reverse_cols: Vec<bool> = matrix
        .item_ids
        .iter()
        .map(|id| spec.item(*id).map(|it| it.reverse).unwrap_or(false))
        .collect();
    let mut values = matrix.values.clone();
    for (idx, cell) in values.iter_mut().enumerate() {
        if reverse_cols[idx % p] {
            if let Some(v) = *cell {
                *cell = Some(spec.likert.reverse(v).map_err(|_| ScaleError::Range {
                    row: idx / p,
                    item: matrix.item_ids[idx % p],
                    value: v,
                    min: spec.likert.min,
                    max: spec.likert.max,
                })?);
            }
        }
    }
    Ok(ResponseMatrix {
        subject_ids: matrix.subject_ids.clone(),
        item_ids: matrix.item_ids.clone(),
        values,
        coding: Coding::ReverseApplied,
    })
}

/// How subjects with missing responses are handled during scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Drop any subject with at least one missing response (the default).
    #[default]
    ListwiseDelete,
    /// Keep a subject when every facet has at most one missing item; facet
    /// scores average the present items. Subjects exceeding the allowance
    /// anywhere are dropped.
    FacetMeanImpute,
}

/// Aggregation level of a score grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Item,
    Facet,
    Domain,
}

/// Scored sample: per-subject grids at item, facet, and domain level.
///
/// Item columns follow scale order and are labeled `Item{id}`. For complete
/// rows each domain score equals both the mean of its items and the mean of
/// its facet scores; under [`MissingPolicy::FacetMeanImpute`] with gaps it is
/// defined as the mean of the facet scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub subject_ids: Vec<String>,
    pub item_labels: Vec<String>,
    pub facet_names: Vec<String>,
    pub domain_names: Vec<String>,
    pub item_scores: DMatrix<f64>,
    pub facet_scores: DMatrix<f64>,
    pub domain_scores: DMatrix<f64>,
    /// Subjects from the input matrix that the missing policy removed.
    pub dropped_subjects: Vec<String>,
}

impl ScoredSample {
    pub fn grid(&self, level: Level) -> &DMatrix<f64> {
        match level {
            Level::Item => &self.item_scores,
            Level::Facet => &self.facet_scores,
            Level::Domain => &self.domain_scores,
        }
    }

    pub fn labels(&self, level: Level) -> &[String] {
        match level {
            Level::Item => &self.item_labels,
            Level::Facet => &self.facet_names,
            Level::Domain => &self.domain_names,
        }
    }

    /// Column of domain scores by domain name.
    pub fn domain_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.domain_names.iter().position(|d| d == name)?;
        Some(self.domain_scores.column(j).iter().copied().collect())
    }
}

/// Scores a reverse-coded response matrix against a scale.
///
/// The matrix must have `Coding::ReverseApplied` and contain a column for
/// every scale item. Facet scores are means of their items, domain scores
/// means of their facets' items; see [`ScoredSample`] for the gap rule.
pub fn score(
    matrix: &ResponseMatrix,
    spec: &ScaleSpec,
    policy: MissingPolicy,
) -> Result<ScoredSample, ScaleError> {
    if matrix.coding != Coding::ReverseApplied {
        return Err(ScaleError::Coding(
            "scoring requires reverse-coded responses; apply reverse coding first".into(),
        ));
    }
    let mut spec_cols = Vec::with_capacity(spec.items.len());
    for item in &spec.items {
        let col = matrix.column_of(item.id).ok_or_else(|| {
            ScaleError::Reference(format!("response matrix lacks item {}", item.id))
        })?;
        spec_cols.push(col);
    }
    let facet_positions: Vec<Vec<usize>> = spec
        .facets
        .iter()
        .map(|f| {
            f.item_ids
                .iter()
                .map(|id| spec.items.iter().position(|it| it.id == *id).unwrap())
                .collect()
        })
        .collect();

    let mut kept_rows = Vec::new();
    let mut dropped_subjects = Vec::new();
    for row in 0..matrix.n_subjects() {
        let keep = match policy {
            MissingPolicy::ListwiseDelete => spec_cols
                .iter()
                .all(|&c| matrix.value(row, c).is_some()),
            MissingPolicy::FacetMeanImpute => facet_positions.iter().all(|positions| {
                let missing = positions
                    .iter()
                    .filter(|&&p| matrix.value(row, spec_cols[p]).is_none())
                    .count();
                missing <= 1 && missing < positions.len()
            }),
        };
        if keep {
            kept_rows.push(row);
        } else {
            dropped_subjects.push(matrix.subject_ids[row].clone());
        }
    }
    if kept_rows.is_empty() {
        return Err(ScaleError::EmptyAfterDeletion);
    }

    let n = kept_rows.len();
    let p = spec.items.len();
    let mut item_scores = DMatrix::from_element(n, p, f64::NAN);
    for (out_row, &row) in kept_rows.iter().enumerate() {
        for (out_col, &col) in spec_cols.iter().enumerate() {
            if let Some(v) = matrix.value(row, col) {
                item_scores[(out_row, out_col)] = v;
            }
        }
    }

    let mut facet_scores = DMatrix::zeros(n, spec.facets.len());
    for (fj, positions) in facet_positions.iter().enumerate() {
        for i in 0..n {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &pos in positions {
                let v = item_scores[(i, pos)];
                if v.is_finite() {
                    sum += v;
                    count += 1;
                }
            }
            facet_scores[(i, fj)] = sum / count as f64;
        }
    }

    let mut domain_scores = DMatrix::zeros(n, spec.domains.len());
    for (dj, domain) in spec.domains.iter().enumerate() {
        let facet_cols: Vec<usize> = domain
            .facet_names
            .iter()
            .map(|name| spec.facets.iter().position(|f| &f.name == name).unwrap())
            .collect();
        for i in 0..n {
            let sum: f64 = facet_cols.iter().map(|&fj| facet_scores[(i, fj)]).sum();
            domain_scores[(i, dj)] = sum / facet_cols.len() as f64;
        }
    }

    Ok(ScoredSample {
        subject_ids: kept_rows
            .iter()
            .map(|&r| matrix.subject_ids[r].clone())
            .collect(),
        item_labels: spec.items.iter().map(|it| format!("Item{}", it.id)).collect(),
        facet_names: spec.facets.iter().map(|f| f.name.clone()).collect(),
        domain_names: spec.domains.iter().map(|d| d.name.clone()).collect(),
        item_scores,
        facet_scores,
        domain_scores,
        dropped_subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete_matrix(n: usize, fill: impl Fn(usize, usize) -> f64) -> ResponseMatrix {
        let spec = bfi2();
        let item_ids = spec.item_ids();
        let mut values = Vec::with_capacity(n * item_ids.len());
        for row in 0..n {
            for col in 0..item_ids.len() {
                values.push(Some(fill(row, col)));
            }
        }
        ResponseMatrix::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            item_ids,
            values,
            Coding::Raw,
            &spec.likert,
        )
        .unwrap()
    }

    fn pseudo_response(row: usize, col: usize) -> f64 {
        let h = (row as u64)
            .wrapping_mul(2654435761)
            .wrapping_add((col as u64).wrapping_mul(40503))
            .wrapping_mul(0x9E3779B97F4A7C15);
        ((h >> 33) % 5 + 1) as f64
    }

    #[test]
    fn bundled_bfi2_has_expected_structure() {
        let spec = bfi2();
        assert_eq!(spec.name, "BFI-2");
        assert_eq!(spec.items.len(), 60);
        assert_eq!(spec.facets.len(), 15);
        assert_eq!(spec.domains.len(), 5);
        assert_eq!(spec.likert, LikertScale { min: 1, max: 5 });
        assert!(spec.facets.iter().all(|f| f.item_ids.len() == 4));
        assert!(spec.domains.iter().all(|d| d.facet_names.len() == 3));
        assert!(spec.domains.iter().all(|d| d.item_ids.len() == 12));
        assert_eq!(spec.reverse_item_ids().len(), 30);
        for d in &spec.domains {
            let mut sorted = d.item_ids.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, d.item_ids);
        }
    }

    #[test]
    fn bundled_bfi2_reverse_sets_per_domain() {
        let spec = bfi2();
        let expected: [(&str, [u32; 6]); 5] = [
            ("Extraversion", [11, 16, 26, 31, 36, 51]),
            ("Agreeableness", [12, 17, 22, 37, 42, 47]),
            ("Conscientiousness", [3, 8, 23, 28, 48, 58]),
            ("Neuroticism", [4, 9, 24, 29, 44, 49]),
            ("Openness", [5, 25, 30, 45, 50, 55]),
        ];
        for (domain, ids) in expected {
            let d = spec.domain(domain).unwrap();
            let reversed: Vec<u32> = d
                .item_ids
                .iter()
                .copied()
                .filter(|id| spec.item(*id).unwrap().reverse)
                .collect();
            assert_eq!(reversed, ids.to_vec(), "domain {domain}");
        }
    }

    #[test]
    fn bundled_bfi2_domain_item_sets() {
        let spec = bfi2();
        let e = spec.domain("Extraversion").unwrap();
        assert_eq!(e.item_ids, vec![1, 6, 11, 16, 21, 26, 31, 36, 41, 46, 51, 56]);
        let o = spec.domain("Openness").unwrap();
        assert_eq!(o.item_ids, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60]);
    }

    #[test]
    fn parse_rejects_duplicate_item_id() {
        let doc = r#"{
            "name": "t", "likert": {"min": 1, "max": 5},
            "items": [
                {"id": 1, "text": "a", "reverse": false},
                {"id": 1, "text": "b", "reverse": false}
            ],
            "facets": [{"name": "f", "items": [1]}],
            "domains": [{"name": "d", "facets": ["f"]}]
        }"#;
        assert_eq!(parse_scale_spec(doc).unwrap_err().name(), "DuplicateIdError");
    }

    #[test]
    fn parse_rejects_unknown_item_reference() {
        let doc = r#"{
            "name": "t", "likert": {"min": 1, "max": 5},
            "items": [{"id": 1, "text": "a", "reverse": false}],
            "facets": [{"name": "f", "items": [1, 9]}],
            "domains": [{"name": "d", "facets": ["f"]}]
        }"#;
        assert_eq!(parse_scale_spec(doc).unwrap_err().name(), "ReferenceError");
    }

    #[test]
    fn parse_rejects_item_in_two_facets() {
        let doc = r#"{
            "name": "t", "likert": {"min": 1, "max": 5},
            "items": [
                {"id": 1, "text": "a", "reverse": false},
                {"id": 2, "text": "b", "reverse": false}
            ],
            "facets": [
                {"name": "f", "items": [1, 2]},
                {"name": "g", "items": [2]}
            ],
            "domains": [{"name": "d", "facets": ["f", "g"]}]
        }"#;
        assert_eq!(parse_scale_spec(doc).unwrap_err().name(), "SchemaError");
    }

    #[test]
    fn parse_rejects_orphan_item_and_orphan_facet() {
        let orphan_item = r#"{
            "name": "t", "likert": {"min": 1, "max": 5},
            "items": [
                {"id": 1, "text": "a", "reverse": false},
                {"id": 2, "text": "b", "reverse": false}
            ],
            "facets": [{"name": "f", "items": [1]}],
            "domains": [{"name": "d", "facets": ["f"]}]
        }"#;
        assert_eq!(parse_scale_spec(orphan_item).unwrap_err().name(), "SchemaError");
        let orphan_facet = r#"{
            "name": "t", "likert": {"min": 1, "max": 5},
            "items": [
                {"id": 1, "text": "a", "reverse": false},
                {"id": 2, "text": "b", "reverse": false}
            ],
            "facets": [
                {"name": "f", "items": [1]},
                {"name": "g", "items": [2]}
            ],
            "domains": [{"name": "d", "facets": ["f"]}]
        }"#;
        assert_eq!(parse_scale_spec(orphan_facet).unwrap_err().name(), "SchemaError");
    }

    #[test]
    fn parse_rejects_bad_likert_range() {
        let doc = r#"{
            "name": "t", "likert": {"min": 5, "max": 1},
            "items": [{"id": 1, "text": "a", "reverse": false}],
            "facets": [{"name": "f", "items": [1]}],
            "domains": [{"name": "d", "facets": ["f"]}]
        }"#;
        assert_eq!(parse_scale_spec(doc).unwrap_err().name(), "SchemaError");
    }

    #[test]
    fn reverse_is_an_involution_and_maps_extremes() {
        let likert = LikertScale::new(1, 5).unwrap();
        assert_eq!(likert.reverse(1.0).unwrap(), 5.0);
        assert_eq!(likert.reverse(5.0).unwrap(), 1.0);
        assert_eq!(likert.reverse(3.0).unwrap(), 3.0);
        for v in 1..=5 {
            let once = likert.reverse(v as f64).unwrap();
            assert_eq!(likert.reverse(once).unwrap(), v as f64);
        }
        assert!(likert.reverse(6.0).is_err());
    }

    #[test]
    fn matrix_rejects_out_of_range_values() {
        let spec = bfi2();
        let mut values: Vec<Option<f64>> = vec![Some(3.0); 60];
        values[1] = Some(7.0);
        let err = ResponseMatrix::new(
            vec!["s0".into()],
            spec.item_ids(),
            values,
            Coding::Raw,
            &spec.likert,
        )
        .unwrap_err();
        match err {
            ScaleError::Range { row, item, value, .. } => {
                assert_eq!(row, 0);
                assert_eq!(item, 2);
                assert_eq!(value, 7.0);
            }
            other => panic!("expected RangeError, got {other:?}"),
        }
    }

    #[test]
    fn reverse_coding_flips_only_reverse_keyed_columns() {
        let matrix = complete_matrix(4, pseudo_response);
        let spec = bfi2();
        let coded = apply_reverse_coding(&matrix, spec).unwrap();
        assert_eq!(coded.coding(), Coding::ReverseApplied);
        for row in 0..4 {
            for (col, &id) in matrix.item_ids().iter().enumerate() {
                let original = matrix.value(row, col).unwrap();
                let recoded = coded.value(row, col).unwrap();
                if spec.item(id).unwrap().reverse {
                    assert_eq!(recoded, 6.0 - original);
                } else {
                    assert_eq!(recoded, original);
                }
            }
        }
        assert_eq!(
            apply_reverse_coding(&coded, spec).unwrap_err().name(),
            "AlreadyCodedError"
        );
    }

    #[test]
    fn scoring_requires_reverse_coded_input() {
        let matrix = complete_matrix(3, pseudo_response);
        let err = score(&matrix, bfi2(), MissingPolicy::ListwiseDelete).unwrap_err();
        assert_eq!(err.name(), "CodingError");
    }

    #[test]
    fn domain_scores_equal_item_means_and_facet_means() {
        let spec = bfi2();
        let matrix = complete_matrix(50, pseudo_response);
        let coded = apply_reverse_coding(&matrix, spec).unwrap();
        let scored = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();
        assert_eq!(scored.subject_ids.len(), 50);
        for (dj, domain) in spec.domains.iter().enumerate() {
            for i in 0..50 {
                let item_mean: f64 = domain
                    .item_ids
                    .iter()
                    .map(|id| {
                        let col = spec.items.iter().position(|it| it.id == *id).unwrap();
                        scored.item_scores[(i, col)]
                    })
                    .sum::<f64>()
                    / domain.item_ids.len() as f64;
                let facet_mean: f64 = domain
                    .facet_names
                    .iter()
                    .map(|name| {
                        let fj = spec.facets.iter().position(|f| &f.name == name).unwrap();
                        scored.facet_scores[(i, fj)]
                    })
                    .sum::<f64>()
                    / 3.0;
                let d = scored.domain_scores[(i, dj)];
                assert!((d - item_mean).abs() < 1e-12, "domain vs item mean");
                assert!((d - facet_mean).abs() < 1e-12, "domain vs facet mean");
            }
        }
    }

    #[test]
    fn all_max_raw_responses_score_at_extremes() {
        // With every raw response at 5, reverse-keyed items code to 1, so a
        // facet with r reverse-keyed items scores ((4 - r) * 5 + r) / 4.
        let spec = bfi2();
        let matrix = complete_matrix(2, |_, _| 5.0);
        let coded = apply_reverse_coding(&matrix, spec).unwrap();
        let scored = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();
        for (fj, facet) in spec.facets.iter().enumerate() {
            let reversed = facet
                .item_ids
                .iter()
                .filter(|id| spec.item(**id).unwrap().reverse)
                .count() as f64;
            let expected = (5.0 * (4.0 - reversed) + 1.0 * reversed) / 4.0;
            assert_eq!(scored.facet_scores[(0, fj)], expected, "facet {}", facet.name);
        }
    }

    #[test]
    fn listwise_delete_drops_subjects_with_any_gap() {
        let spec = bfi2();
        let matrix = complete_matrix(5, pseudo_response);
        let mut values: Vec<Option<f64>> = (0..5)
            .flat_map(|r| (0..60).map(move |c| (r, c)))
            .map(|(r, c)| matrix.value(r, c))
            .collect();
        values[2 * 60 + 7] = None;
        let with_gap = ResponseMatrix::new(
            matrix.subject_ids().to_vec(),
            matrix.item_ids().to_vec(),
            values,
            Coding::Raw,
            &spec.likert,
        )
        .unwrap();
        let coded = apply_reverse_coding(&with_gap, spec).unwrap();
        let scored = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();
        assert_eq!(scored.subject_ids.len(), 4);
        assert_eq!(scored.dropped_subjects, vec!["s2".to_string()]);
    }

    #[test]
    fn facet_mean_impute_keeps_single_gap_rows() {
        let spec = bfi2();
        let matrix = complete_matrix(3, |_, _| 4.0);
        let mut values: Vec<Option<f64>> = (0..3)
            .flat_map(|r| (0..60).map(move |c| (r, c)))
            .map(|(r, c)| matrix.value(r, c))
            .collect();
        // Subject 1 misses item 1 (facet Sociability); facet mean over the
        // three present items is unchanged because all responses equal 4.
        values[60] = None;
        // Subject 2 misses two items of the same facet and must be dropped.
        values[2 * 60] = None;
        values[2 * 60 + 15] = None;
        let with_gaps = ResponseMatrix::new(
            matrix.subject_ids().to_vec(),
            matrix.item_ids().to_vec(),
            values,
            Coding::Raw,
            &spec.likert,
        )
        .unwrap();
        let coded = apply_reverse_coding(&with_gaps, spec).unwrap();
        let scored = score(&coded, spec, MissingPolicy::FacetMeanImpute).unwrap();
        assert_eq!(scored.subject_ids, vec!["s0".to_string(), "s1".to_string()]);
        assert_eq!(scored.dropped_subjects, vec!["s2".to_string()]);
        let soc = spec.facets.iter().position(|f| f.name == "Sociability").unwrap();
        // Raw 4s: items 16 and 31 are reverse keyed, so coded values are
        // {4, 2, 2, 4}; dropping item 1 leaves {2, 2, 4}.
        assert!((scored.facet_scores[(1, soc)] - 8.0 / 3.0).abs() < 1e-12);
        assert!((scored.facet_scores[(0, soc)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_after_deletion_is_reported() {
        let spec = bfi2();
        let values: Vec<Option<f64>> = (0..60)
            .map(|c| if c == 0 { None } else { Some(3.0) })
            .collect();
        let matrix = ResponseMatrix::new(
            vec!["only".into()],
            spec.item_ids(),
            values,
            Coding::ReverseApplied,
            &spec.likert,
        )
        .unwrap();
        let err = score(&matrix, spec, MissingPolicy::ListwiseDelete).unwrap_err();
        assert_eq!(err.name(), "EmptyAfterDeletionError");
    }

    #[test]
    fn scoring_reorders_shuffled_columns_by_item_id() {
        let spec = bfi2();
        let matrix = complete_matrix(6, pseudo_response);
        let coded = apply_reverse_coding(&matrix, spec).unwrap();
        let mut perm: Vec<usize> = (0..60).collect();
        perm.reverse();
        let shuffled_ids: Vec<u32> = perm.iter().map(|&c| coded.item_ids()[c]).collect();
        let mut shuffled_values = Vec::with_capacity(6 * 60);
        for row in 0..6 {
            for &c in &perm {
                shuffled_values.push(coded.value(row, c));
            }
        }
        let shuffled = ResponseMatrix::new(
            coded.subject_ids().to_vec(),
            shuffled_ids,
            shuffled_values,
            Coding::ReverseApplied,
            &spec.likert,
        )
        .unwrap();
        let a = score(&coded, spec, MissingPolicy::ListwiseDelete).unwrap();
        let b = score(&shuffled, spec, MissingPolicy::ListwiseDelete).unwrap();
        assert_eq!(a.item_scores, b.item_scores);
        assert_eq!(a.domain_scores, b.domain_scores);
    }
}
