//! Weighted aggregation of annotations.
//!
//! A doubly rated task contributes two annotations at weight 0.5, a singly
//! rated one a single annotation at 1.0, so every task counts once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::Criterion;
use crate::stats::{weighted_summary, WeightedSummary};
use crate::store::{AnnotationRecord, Phase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("response {response_id} of task {task_id} has no approach label")]
    MissingApproach { task_id: String, response_id: String },
    #[error("response {response_id} of task {task_id} has no annotation")]
    MissingAnnotation { task_id: String, response_id: String },
}

/// Weighted per-response value of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub task_id: String,
    pub response_id: String,
    pub approach: String,
    pub labels: BTreeMap<String, String>,
    pub value: f64,
    pub weight: f64,
    pub annotations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: String,
    pub responses: usize,
    pub annotations: usize,
    #[serde(flatten)]
    pub summary: WeightedSummary,
    /// Weighted share of each category label, for proportion statements
    /// such as "share with fully accurate explanations".
    pub distribution: BTreeMap<String, f64>,
}

/// Main-phase records in canonical order, so float sums do not depend on
/// arrival order.
fn canonical(records: &[AnnotationRecord]) -> Result<Vec<&AnnotationRecord>, AggregateError> {
    let mut out: Vec<&AnnotationRecord> = records.iter().filter(|r| r.phase == Phase::Main).collect();
    for r in &out {
        if r.approach.is_none() {
            return Err(AggregateError::MissingApproach {
                task_id: r.task_id.clone(),
                response_id: r.response_id.clone(),
            });
        }
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

fn approach(r: &AnnotationRecord) -> &str {
    r.approach.as_deref().expect("checked by canonical")
}

/// Per-response weighted means. Annotations without a value for the
/// criterion (no references) are skipped.
pub fn response_scores(records: &[AnnotationRecord], criterion: Criterion) -> Result<Vec<ResponseScore>, AggregateError> {
    let mut groups: BTreeMap<(&str, &str), Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in canonical(records)? {
        groups.entry((&r.task_id, &r.response_id)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((task_id, response_id), rs) in groups {
        let values: Vec<(f64, f64)> = rs
            .iter()
            .filter_map(|r| criterion.value(&r.rubric).map(|v| (v, r.weight)))
            .collect();
        let Some(summary) = weighted_summary(&values) else {
            continue;
        };
        out.push(ResponseScore {
            task_id: task_id.to_string(),
            response_id: response_id.to_string(),
            approach: approach(rs[0]).to_string(),
            labels: rs[0].labels.clone(),
            value: summary.mean,
            weight: summary.weight,
            annotations: values.len(),
        });
    }
    Ok(out)
}

/// Approach-level weighted statistics over individual annotations.
pub fn summarize(records: &[AnnotationRecord], criterion: Criterion) -> Result<Vec<ApproachSummary>, AggregateError> {
    struct Acc<'a> {
        values: Vec<(f64, f64)>,
        responses: std::collections::BTreeSet<(&'a str, &'a str)>,
        distribution: BTreeMap<String, f64>,
    }
    let mut by_approach: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in canonical(records)? {
        let codes = criterion.codes(&r.rubric);
        let Some(value) = criterion.value(&r.rubric) else {
            continue;
        };
        let acc = by_approach.entry(approach(r)).or_insert_with(|| Acc {
            values: Vec::new(),
            responses: Default::default(),
            distribution: BTreeMap::new(),
        });
        acc.values.push((value, r.weight));
        acc.responses.insert((&r.task_id, &r.response_id));
        let share = r.weight / codes.len() as f64;
        for (_, code) in codes {
            *acc.distribution.entry(criterion.categories()[code].clone()).or_default() += share;
        }
    }
    Ok(by_approach
        .into_iter()
        .filter_map(|(name, acc)| {
            let summary = weighted_summary(&acc.values)?;
            let distribution = acc
                .distribution
                .into_iter()
                .map(|(label, w)| (label, w / summary.weight))
                .collect();
            Some(ApproachSummary {
                approach: name.to_string(),
                responses: acc.responses.len(),
                annotations: acc.values.len(),
                summary,
                distribution,
            })
        })
        .collect())
}

/// Fails on the first expected `(task, response)` pair with no annotation.
pub fn check_complete<'a>(
    records: &[AnnotationRecord],
    expected: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(), AggregateError> {
    let present: std::collections::HashSet<(&str, &str)> =
        records.iter().map(|r| (r.task_id.as_str(), r.response_id.as_str())).collect();
    for (task_id, response_id) in expected {
        if !present.contains(&(task_id, response_id)) {
            return Err(AggregateError::MissingAnnotation {
                task_id: task_id.into(),
                response_id: response_id.into(),
            });
        }
    }
    Ok(())
}
