//! Replay of an externally supplied annotation dataset.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::aggregate::{summarize, AggregateError};
use crate::rubric::Criterion;
use crate::store::{load_records, AnnotationRecord, StoreError};

/// Path to a released annotation dataset converted to the store format.
pub const DATASET_ENV: &str = "VERACITY_ANNOTATION_DATASET";

pub fn dataset_path() -> Option<PathBuf> {
    std::env::var_os(DATASET_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Loads the dataset named by [`DATASET_ENV`]; `Ok(None)` when unset.
pub fn load_dataset() -> Result<Option<Vec<AnnotationRecord>>, StoreError> {
    dataset_path().map(|p| load_records(&p)).transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub approach: String,
    pub n: f64,
    pub mean: f64,
    pub sd: Option<f64>,
}

/// Overall-quality mean and SD per approach, best first.
pub fn overall_headline(records: &[AnnotationRecord]) -> Result<Vec<Headline>, AggregateError> {
    let mut rows: Vec<Headline> = summarize(records, Criterion::Overall)?
        .into_iter()
        .map(|s| Headline {
            approach: s.approach,
            n: s.summary.weight,
            mean: s.summary.mean,
            sd: s.summary.sd,
        })
        .collect();
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.approach.cmp(&b.approach)));
    Ok(rows)
}
