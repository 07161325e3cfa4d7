//! Annotation store: one JSON object per line.

use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::{Rubric, ScaleError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Onboarding,
    #[default]
    Main,
}

/// One annotator's rating of one response.
///
/// `approach` and `labels` are filled in server-side from the task set so
/// that the store is self-contained for analysis; they never go to raters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub task_id: String,
    pub annotator_id: String,
    pub response_id: String,
    #[serde(default)]
    pub post_id: Option<String>,
    #[serde(default)]
    pub approach: Option<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub phase: Phase,
    /// 0.5 for tasks rated by two annotators, 1.0 otherwise.
    pub weight: f64,
    pub rubric: Rubric,
    pub explanation: String,
    #[serde(default)]
    pub started_at: Option<DateTime<Utc>>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("explanation is empty")]
    EmptyExplanation,
    #[error("{0} is empty")]
    EmptyId(&'static str),
    #[error("weight {0} is not in (0, 1]")]
    Weight(f64),
}

impl AnnotationRecord {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.task_id, &self.annotator_id, &self.response_id)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        for (name, value) in [
            ("task_id", &self.task_id),
            ("annotator_id", &self.annotator_id),
            ("response_id", &self.response_id),
        ] {
            if value.trim().is_empty() {
                return Err(RecordError::EmptyId(name));
            }
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(RecordError::Weight(self.weight));
        }
        if self.explanation.trim().is_empty() {
            return Err(RecordError::EmptyExplanation);
        }
        self.rubric.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("annotation store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate annotation for task {task_id}, annotator {annotator_id}, response {response_id}")]
    Duplicate {
        line: usize,
        task_id: String,
        annotator_id: String,
        response_id: String,
    },
}

/// Parses and validates a store. Blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<AnnotationRecord>, StoreError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(line).map_err(|e| StoreError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| StoreError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let (t, a, r) = record.key();
        if !seen.insert((t.to_string(), a.to_string(), r.to_string())) {
            return Err(StoreError::Duplicate {
                line: line_no,
                task_id: t.into(),
                annotator_id: a.into(),
                response_id: r.into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<AnnotationRecord>, StoreError> {
    parse_records(&std::fs::read_to_string(path)?)
}

/// Append-only handle on a store file.
pub struct AnnotationStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl AnnotationStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            lock: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<Vec<AnnotationRecord>, StoreError> {
        let _guard = self.lock.lock().expect("annotation store lock poisoned");
        load_records(&self.path)
    }

    /// Appends a validated record. Callers check for duplicates first.
    pub fn append(&self, record: &AnnotationRecord) -> Result<(), StoreError> {
        record.validate().map_err(|e| StoreError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        let _guard = self.lock.lock().expect("annotation store lock poisoned");
        let mut file = OpenOptions::new().append(true).open(&self.path)?;
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(file, "{line}")?;
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn sample_record(task: &str, annotator: &str, response: &str, approach: &str, weight: f64, overall: u8) -> AnnotationRecord {
    AnnotationRecord {
        task_id: task.into(),
        annotator_id: annotator.into(),
        response_id: response.into(),
        post_id: None,
        approach: Some(approach.into()),
        labels: BTreeMap::new(),
        phase: Phase::Main,
        weight,
        rubric: crate::rubric::sample_rubric(overall),
        explanation: "checked the sources".into(),
        started_at: None,
        submitted_at: DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").unwrap().with_timezone(&Utc),
    }
}
