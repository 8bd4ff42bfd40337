//! Prompt-specific checklists: loading, extraction and scoring.

mod extract;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_parameters, extractor_kind, Extracted, ParameterSet, Value, ValueKind, EXTRACTORS};

/// Extractors whose criteria are set aside after a `pair_style zero` rerun.
pub const PAIR_EXTRACTORS: &[&str] = &["pair_style_word"];

const SHIPPED: &[(&str, &str)] = &[
    ("prompt1", include_str!("../../rubrics/prompt1.rubric.json")),
    ("prompt2", include_str!("../../rubrics/prompt2.rubric.json")),
    ("prompt3", include_str!("../../rubrics/prompt3.rubric.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SystemDefinition,
    Thermodynamics,
    Dynamics,
    Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Number(f64),
    Word(String),
    /// Admissible words; for sequence extractors, the exact sequence.
    WordSet(Vec<String>),
    Tuple(Vec<f64>),
    Interval {
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceKind {
    Rel,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub kind: ToleranceKind,
    pub value: f64,
}

impl Tolerance {
    /// Closed band `[lo, hi]` around `expected`.
    pub fn band(&self, expected: f64) -> (f64, f64) {
        let width = match self.kind {
            ToleranceKind::Rel => self.value * expected.abs(),
            ToleranceKind::Abs => self.value,
        };
        (expected - width, expected + width)
    }

    pub fn admits(&self, expected: f64, actual: f64) -> bool {
        let (lo, hi) = self.band(expected);
        actual >= lo && actual <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub id: String,
    pub category: Category,
    pub extractor: String,
    pub expected: Expected,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    pub id: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("rubric schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot read rubric: {0}")]
    Io(#[from] std::io::Error),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> RubricError {
    RubricError::Schema { path: path.into(), message: message.into() }
}

impl Rubric {
    fn validate(&self) -> Result<(), RubricError> {
        let mut ids = BTreeSet::new();
        for (i, c) in self.criteria.iter().enumerate() {
            let at = |field: &str| format!("criteria[{i}].{field}");
            if !ids.insert(c.id.as_str()) {
                return Err(schema(at("id"), format!("duplicate criterion id `{}`", c.id)));
            }
            let Some(kind) = extractor_kind(&c.extractor) else {
                return Err(schema(at("extractor"), format!("unknown extractor `{}`", c.extractor)));
            };
            let needs_tolerance = match (&c.expected, kind) {
                (Expected::Number(_), ValueKind::Number) | (Expected::Tuple(_), ValueKind::Tuple) => true,
                (Expected::Interval { min, max }, ValueKind::Number) => {
                    if !(min.is_finite() && max.is_finite() && min <= max) {
                        return Err(schema(at("expected"), "interval needs finite min <= max"));
                    }
                    false
                }
                (Expected::Word(_), ValueKind::Word | ValueKind::Words) => false,
                (Expected::WordSet(set), ValueKind::Word | ValueKind::Words) => {
                    if set.is_empty() {
                        return Err(schema(at("expected"), "word set is empty"));
                    }
                    false
                }
                (_, kind) => {
                    return Err(schema(
                        at("expected"),
                        format!("expected value does not fit extractor `{}` ({kind:?})", c.extractor),
                    ))
                }
            };
            match (&c.tolerance, needs_tolerance) {
                (None, true) => return Err(schema(at("tolerance"), "numeric criterion needs a tolerance")),
                (Some(t), _) if !(t.value.is_finite() && t.value >= 0.0) => {
                    return Err(schema(at("tolerance.value"), "tolerance must be finite and non-negative"))
                }
                (Some(_), false) => {
                    return Err(schema(at("tolerance"), "tolerance only applies to numbers and tuples"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn criterion(&self, id: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

pub fn load_rubric(text: &str) -> Result<Rubric, RubricError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let rubric: Rubric =
        serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
    rubric.validate()?;
    Ok(rubric)
}

pub fn load_rubric_path(path: &Path) -> Result<Rubric, RubricError> {
    load_rubric(&std::fs::read_to_string(path)?)
}

/// The rubrics shipped with the crate, keyed by prompt id.
pub fn shipped_rubrics() -> Vec<Rubric> {
    SHIPPED
        .iter()
        .map(|(name, text)| load_rubric(text).unwrap_or_else(|e| panic!("shipped rubric {name}: {e}")))
        .collect()
}

pub fn shipped_rubric(id: &str) -> Option<Rubric> {
    shipped_rubrics().into_iter().find(|r| r.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotFound,
    /// Set aside by the caller (pair-style criteria after a zero-style run).
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub category: Category,
    pub extractor: String,
    pub verdict: Verdict,
    pub extracted: Option<Value>,
    pub expected: Expected,
    pub sources: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricResult {
    pub rubric_id: String,
    pub criteria: Vec<CriterionResult>,
    pub overall: Verdict,
}

impl RubricResult {
    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    pub fn failing(&self) -> Vec<&str> {
        self.criteria
            .iter()
            .filter(|c| matches!(c.verdict, Verdict::Fail | Verdict::NotFound))
            .map(|c| c.id.as_str())
            .collect()
    }

    pub fn verdict(&self, id: &str) -> Option<Verdict> {
        self.criteria.iter().find(|c| c.id == id).map(|c| c.verdict)
    }
}

fn matches(expected: &Expected, tol: Option<&Tolerance>, actual: &Value) -> bool {
    match (expected, actual) {
        (Expected::Number(e), Value::Number(x)) => tol.is_some_and(|t| t.admits(*e, *x)),
        (Expected::Interval { min, max }, Value::Number(x)) => *x >= *min && *x <= *max,
        (Expected::Tuple(e), Value::Tuple(x)) => {
            e.len() == x.len() && tol.is_some_and(|t| e.iter().zip(x).all(|(e, x)| t.admits(*e, *x)))
        }
        (Expected::Word(e), Value::Word(x)) => e == x,
        (Expected::WordSet(set), Value::Word(x)) => set.contains(x),
        (Expected::Word(e), Value::Words(x)) => x.len() == 1 && &x[0] == e,
        (Expected::WordSet(seq), Value::Words(x)) => seq == x,
        _ => false,
    }
}

/// Score every criterion.
pub fn evaluate_rubric(params: &ParameterSet, rubric: &Rubric) -> RubricResult {
    evaluate_rubric_with(params, rubric, &[])
}

/// Score every criterion, marking those whose extractor is in `ignore` as
/// ignored. Overall passes when every criterion that is not ignored passes.
pub fn evaluate_rubric_with(params: &ParameterSet, rubric: &Rubric, ignore: &[&str]) -> RubricResult {
    let criteria: Vec<CriterionResult> = rubric
        .criteria
        .iter()
        .map(|c| {
            let found = params.get(&c.extractor);
            let extracted = found.and_then(|e| e.value.clone());
            let verdict = if ignore.contains(&c.extractor.as_str()) {
                Verdict::Ignored
            } else {
                match &extracted {
                    None => Verdict::NotFound,
                    Some(v) if matches(&c.expected, c.tolerance.as_ref(), v) => Verdict::Pass,
                    Some(_) => Verdict::Fail,
                }
            };
            CriterionResult {
                id: c.id.clone(),
                category: c.category,
                extractor: c.extractor.clone(),
                verdict,
                extracted,
                expected: c.expected.clone(),
                sources: found.map(|e| e.sources.clone()).unwrap_or_default(),
                note: found.and_then(|e| e.note.clone()),
            }
        })
        .collect();
    let overall = if criteria.iter().all(|c| matches!(c.verdict, Verdict::Pass | Verdict::Ignored)) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    RubricResult { rubric_id: rubric.id.clone(), criteria, overall }
}
