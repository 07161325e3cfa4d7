//! The 13-criterion correction-quality rubric plus overall quality.
//!
//! Category order for every criterion lives in `schema/rubric.json`; the
//! code of a category is its index there. Kappa weights depend on it.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Explicitness {
    Unclear,
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationExistence {
    NoCorrect,
    CorrectWithMistakes,
    CorrectOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fluency {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coherence {
    Barely,
    Partially,
    Fully,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceCredibility {
    Low,
    Medium,
    High,
    VeryHigh,
}

/// One reference of the rated response, judged by the annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRating {
    pub url: String,
    pub reachable: bool,
    pub relevant: bool,
    pub credibility: ReferenceCredibility,
}

/// One annotator's judgment of one response.
///
/// Five-point scales run 1..=5, the 0..=10 scores are integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    pub explicitness: Explicitness,
    pub identification_existence: IdentificationExistence,
    pub identification_comprehensiveness: u8,
    pub explanation_accuracy: u8,
    pub explanation_informativeness: u8,
    pub text_relevance: u8,
    pub text_factuality: u8,
    pub text_fluency: Fluency,
    pub text_coherence: Coherence,
    pub text_toxicity: bool,
    #[serde(default)]
    pub references: Vec<ReferenceRating>,
    pub overall: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field} = {value} is outside {min}..={max}")]
pub struct ScaleError {
    pub field: &'static str,
    pub value: u8,
    pub min: u8,
    pub max: u8,
}

impl Rubric {
    pub fn validate(&self) -> Result<(), ScaleError> {
        let check = |field, value: u8, min, max| {
            if (min..=max).contains(&value) {
                Ok(())
            } else {
                Err(ScaleError { field, value, min, max })
            }
        };
        check("identification_comprehensiveness", self.identification_comprehensiveness, 1, 5)?;
        check("explanation_accuracy", self.explanation_accuracy, 1, 5)?;
        check("explanation_informativeness", self.explanation_informativeness, 0, 10)?;
        check("text_relevance", self.text_relevance, 0, 10)?;
        check("text_factuality", self.text_factuality, 1, 5)?;
        check("overall", self.overall, 0, 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Response,
    /// Rated once per reference of the response.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Explicitness,
    IdentificationExistence,
    IdentificationComprehensiveness,
    ExplanationAccuracy,
    ExplanationInformativeness,
    TextRelevance,
    TextFactuality,
    TextFluency,
    TextCoherence,
    TextToxicity,
    ReferenceReachability,
    ReferenceRelevance,
    ReferenceCredibility,
    Overall,
}

#[derive(Debug, Deserialize)]
struct SchemaFile {
    criteria: Vec<SchemaCriterion>,
}

#[derive(Debug, Deserialize)]
struct SchemaCriterion {
    id: String,
    level: Level,
    categories: Vec<String>,
}

pub const SCHEMA_JSON: &str = include_str!("../schema/rubric.json");

static SCHEMA: LazyLock<SchemaFile> = LazyLock::new(|| serde_json::from_str(SCHEMA_JSON).expect("bundled rubric schema parses"));

impl Criterion {
    /// The thirteen criteria followed by overall quality.
    pub const ALL: [Criterion; 14] = [
        Criterion::Explicitness,
        Criterion::IdentificationExistence,
        Criterion::IdentificationComprehensiveness,
        Criterion::ExplanationAccuracy,
        Criterion::ExplanationInformativeness,
        Criterion::TextRelevance,
        Criterion::TextFactuality,
        Criterion::TextFluency,
        Criterion::TextCoherence,
        Criterion::TextToxicity,
        Criterion::ReferenceReachability,
        Criterion::ReferenceRelevance,
        Criterion::ReferenceCredibility,
        Criterion::Overall,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Criterion::Explicitness => "explicitness",
            Criterion::IdentificationExistence => "identification_existence",
            Criterion::IdentificationComprehensiveness => "identification_comprehensiveness",
            Criterion::ExplanationAccuracy => "explanation_accuracy",
            Criterion::ExplanationInformativeness => "explanation_informativeness",
            Criterion::TextRelevance => "text_relevance",
            Criterion::TextFactuality => "text_factuality",
            Criterion::TextFluency => "text_fluency",
            Criterion::TextCoherence => "text_coherence",
            Criterion::TextToxicity => "text_toxicity",
            Criterion::ReferenceReachability => "reference_reachability",
            Criterion::ReferenceRelevance => "reference_relevance",
            Criterion::ReferenceCredibility => "reference_credibility",
            Criterion::Overall => "overall",
        }
    }

    fn schema(self) -> &'static SchemaCriterion {
        SCHEMA
            .criteria
            .iter()
            .find(|c| c.id == self.id())
            .expect("every criterion is in the bundled schema")
    }

    pub fn level(self) -> Level {
        self.schema().level
    }

    /// Category labels in ordinal order.
    pub fn categories(self) -> &'static [String] {
        &self.schema().categories
    }

    /// Criteria whose skewed distributions make kappa uninformative; they
    /// are reported with observed agreement instead.
    pub fn uses_observed_agreement(self) -> bool {
        matches!(
            self,
            Criterion::TextToxicity | Criterion::TextFluency | Criterion::ReferenceRelevance
        )
    }

    /// Ordinal codes this criterion takes in `rubric`: one for response-level
    /// criteria, one per reference (keyed by URL) for reference-level ones.
    pub fn codes(self, rubric: &Rubric) -> Vec<(Option<&str>, usize)> {
        let one = |code: usize| vec![(None, code)];
        let scale = |v: u8, min: u8| (v - min) as usize;
        match self {
            Criterion::Explicitness => one(rubric.explicitness as usize),
            Criterion::IdentificationExistence => one(rubric.identification_existence as usize),
            Criterion::IdentificationComprehensiveness => one(scale(rubric.identification_comprehensiveness, 1)),
            Criterion::ExplanationAccuracy => one(scale(rubric.explanation_accuracy, 1)),
            Criterion::ExplanationInformativeness => one(rubric.explanation_informativeness as usize),
            Criterion::TextRelevance => one(rubric.text_relevance as usize),
            Criterion::TextFactuality => one(scale(rubric.text_factuality, 1)),
            Criterion::TextFluency => one(rubric.text_fluency as usize),
            Criterion::TextCoherence => one(rubric.text_coherence as usize),
            Criterion::TextToxicity => one(rubric.text_toxicity as usize),
            Criterion::ReferenceReachability => refs(rubric, |r| r.reachable as usize),
            Criterion::ReferenceRelevance => refs(rubric, |r| r.relevant as usize),
            Criterion::ReferenceCredibility => refs(rubric, |r| r.credibility as usize),
            Criterion::Overall => one(rubric.overall as usize),
        }
    }

    /// Numeric value of a code on the criterion's own scale (five-point
    /// scales start at 1, everything else at 0).
    pub fn value_of_code(self, code: usize) -> f64 {
        match self {
            Criterion::IdentificationComprehensiveness | Criterion::ExplanationAccuracy | Criterion::TextFactuality => {
                (code + 1) as f64
            }
            _ => code as f64,
        }
    }

    /// Value of the criterion for one annotation. Reference-level criteria
    /// average over references; `None` when the response had none.
    pub fn value(self, rubric: &Rubric) -> Option<f64> {
        let codes = self.codes(rubric);
        if codes.is_empty() {
            return None;
        }
        let sum: f64 = codes.iter().map(|(_, c)| self.value_of_code(*c)).sum();
        Some(sum / codes.len() as f64)
    }
}

fn refs(rubric: &Rubric, f: impl Fn(&ReferenceRating) -> usize) -> Vec<(Option<&str>, usize)> {
    rubric.references.iter().map(|r| (Some(r.url.as_str()), f(r))).collect()
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.id() == s.trim())
            .ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

#[cfg(test)]
pub(crate) fn sample_rubric(overall: u8) -> Rubric {
    Rubric {
        explicitness: Explicitness::Explicit,
        identification_existence: IdentificationExistence::CorrectOnly,
        identification_comprehensiveness: 4,
        explanation_accuracy: 5,
        explanation_informativeness: 8,
        text_relevance: 9,
        text_factuality: 5,
        text_fluency: Fluency::High,
        text_coherence: Coherence::Fully,
        text_toxicity: false,
        references: vec![ReferenceRating {
            url: "https://example.org/a".into(),
            reachable: true,
            relevant: true,
            credibility: ReferenceCredibility::VeryHigh,
        }],
        overall,
    }
}
