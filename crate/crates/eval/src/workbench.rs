//! Server side of the annotation workbench: task sets, blinded task views
//! and validated submissions into the annotation store.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rubric::Rubric;
use crate::store::{AnnotationRecord, AnnotationStore, Phase, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostView {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub images: Vec<String>,
    #[serde(default)]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub author_name: String,
    #[serde(default)]
    pub author_screen_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseDefinition {
    pub response_id: String,
    /// Which system wrote the response. Never sent to raters.
    pub approach: String,
    pub text: String,
    #[serde(default)]
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub task_id: String,
    #[serde(default)]
    pub phase: Phase,
    pub post: PostView,
    pub responses: Vec<ResponseDefinition>,
    /// Post metadata for grouped reports (modality, leaning, ...).
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    /// Hex SHA-256 of the annotator's bearer token.
    pub token_sha256: String,
}

/// Everything the workbench serves: tasks, who rates what, and tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tasks: Vec<TaskDefinition>,
    pub annotators: Vec<Annotator>,
    /// Annotator id to task ids, in serving order.
    pub assignments: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum TaskSetError {
    #[error("task set io: {0}")]
    Io(#[from] std::io::Error),
    #[error("task set parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("task set invalid: {0}")]
    Invalid(String),
}

impl TaskSet {
    pub fn load(path: &Path) -> Result<Self, TaskSetError> {
        let set: TaskSet = serde_json::from_slice(&std::fs::read(path)?)?;
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<(), TaskSetError> {
        let ids: BTreeSet<&str> = self.tasks.iter().map(|t| t.task_id.as_str()).collect();
        if ids.len() != self.tasks.len() {
            return Err(TaskSetError::Invalid("duplicate task id".into()));
        }
        for task in &self.tasks {
            let responses: BTreeSet<&str> = task.responses.iter().map(|r| r.response_id.as_str()).collect();
            if responses.len() != task.responses.len() || responses.is_empty() {
                return Err(TaskSetError::Invalid(format!(
                    "task {} needs distinct, nonempty response ids",
                    task.task_id
                )));
            }
        }
        for (annotator, tasks) in &self.assignments {
            if !self.annotators.iter().any(|a| &a.id == annotator) {
                return Err(TaskSetError::Invalid(format!("assignment for unknown annotator {annotator}")));
            }
            if let Some(t) = tasks.iter().find(|t| !ids.contains(t.as_str())) {
                return Err(TaskSetError::Invalid(format!("{annotator} is assigned unknown task {t}")));
            }
        }
        Ok(())
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskDefinition> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Number of annotators assigned `task_id`.
    pub fn raters(&self, task_id: &str) -> usize {
        self.assignments
            .values()
            .filter(|tasks| tasks.iter().any(|t| t == task_id))
            .count()
    }
}

pub fn token_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

/// Opaque per-task id of a response, so ids that embed the approach name
/// do not leak it.
pub fn blind_id(task_id: &str, response_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(task_id.as_bytes());
    h.update([0]);
    h.update(response_id.as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn order_seed(task_id: &str, annotator_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"order\0");
    h.update(task_id.as_bytes());
    h.update([0]);
    h.update(annotator_id.as_bytes());
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindResponse {
    pub response_id: String,
    pub text: String,
    pub references: Vec<String>,
    pub submitted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed_tasks: usize,
    pub total_tasks: usize,
}

/// What the browser receives for one task. Carries no approach labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub phase: Phase,
    pub post: PostView,
    pub responses: Vec<BlindResponse>,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub task_id: String,
    /// The blinded id from the task view.
    pub response_id: String,
    pub rubric: Rubric,
    pub explanation: String,
    #[serde(default)]
    pub started_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("no tasks remaining")]
    NoTasksRemaining,
    #[error("task {0} is not assigned to this annotator")]
    NotAssigned(String),
    #[error("task {task_id} has no response {response_id}")]
    UnknownResponse { task_id: String, response_id: String },
    #[error("invalid submission: {0}")]
    Validation(String),
    #[error("response already submitted")]
    Conflict,
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub struct Workbench {
    tasks: TaskSet,
    store: AnnotationStore,
    /// (task, annotator, real response id) already stored.
    done: Mutex<BTreeSet<(String, String, String)>>,
}

impl Workbench {
    pub fn new(tasks: TaskSet, store: AnnotationStore) -> Result<Self, WorkbenchError> {
        tasks.check().map_err(|e| WorkbenchError::Validation(e.to_string()))?;
        let done = store
            .load()?
            .into_iter()
            .map(|r| (r.task_id, r.annotator_id, r.response_id))
            .collect();
        Ok(Self {
            tasks,
            store,
            done: Mutex::new(done),
        })
    }

    pub fn tasks(&self) -> &TaskSet {
        &self.tasks
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    pub fn authenticate(&self, token: &str) -> Option<&str> {
        let hash = token_hash(token);
        self.tasks
            .annotators
            .iter()
            .find(|a| a.token_sha256.eq_ignore_ascii_case(&hash))
            .map(|a| a.id.as_str())
    }

    fn is_complete(&self, done: &BTreeSet<(String, String, String)>, task: &TaskDefinition, annotator: &str) -> bool {
        task.responses
            .iter()
            .all(|r| done.contains(&(task.task_id.clone(), annotator.to_string(), r.response_id.clone())))
    }

    /// View of `task_id` for `annotator`; responses in a fixed per
    /// (task, annotator) shuffled order.
    pub fn view(&self, annotator: &str, task_id: &str) -> Result<TaskView, WorkbenchError> {
        let assigned = self.tasks.assignments.get(annotator).map(Vec::as_slice).unwrap_or_default();
        if !assigned.iter().any(|t| t == task_id) {
            return Err(WorkbenchError::NotAssigned(task_id.into()));
        }
        let task = self.tasks.task(task_id).ok_or_else(|| WorkbenchError::NotAssigned(task_id.into()))?;
        let done = self.done.lock().expect("workbench lock poisoned");
        let mut responses: Vec<BlindResponse> = task
            .responses
            .iter()
            .map(|r| BlindResponse {
                response_id: blind_id(task_id, &r.response_id),
                text: r.text.clone(),
                references: r.references.clone(),
                submitted: done.contains(&(task_id.to_string(), annotator.to_string(), r.response_id.clone())),
            })
            .collect();
        responses.shuffle(&mut ChaCha8Rng::from_seed(order_seed(task_id, annotator)));
        let completed_tasks = assigned
            .iter()
            .filter_map(|t| self.tasks.task(t))
            .filter(|t| self.is_complete(&done, t, annotator))
            .count();
        Ok(TaskView {
            task_id: task_id.to_string(),
            phase: task.phase,
            post: task.post.clone(),
            responses,
            progress: Progress {
                completed_tasks,
                total_tasks: assigned.len(),
            },
        })
    }

    /// First assigned task with an unrated response.
    pub fn next_task(&self, annotator: &str) -> Result<TaskView, WorkbenchError> {
        let next = {
            let done = self.done.lock().expect("workbench lock poisoned");
            self.tasks
                .assignments
                .get(annotator)
                .into_iter()
                .flatten()
                .filter_map(|t| self.tasks.task(t))
                .find(|t| !self.is_complete(&done, t, annotator))
                .map(|t| t.task_id.clone())
        };
        match next {
            Some(task_id) => self.view(annotator, &task_id),
            None => Err(WorkbenchError::NoTasksRemaining),
        }
    }

    /// Validates and stores one rating. The stored record gets the real
    /// response id, approach, labels and task weight.
    pub fn submit(&self, annotator: &str, submission: Submission) -> Result<AnnotationRecord, WorkbenchError> {
        let task_id = submission.task_id.as_str();
        let assigned = self.tasks.assignments.get(annotator).map(Vec::as_slice).unwrap_or_default();
        if !assigned.iter().any(|t| t == task_id) {
            return Err(WorkbenchError::NotAssigned(task_id.into()));
        }
        let task = self.tasks.task(task_id).ok_or_else(|| WorkbenchError::NotAssigned(task_id.into()))?;
        let response = task
            .responses
            .iter()
            .find(|r| blind_id(task_id, &r.response_id) == submission.response_id)
            .ok_or_else(|| WorkbenchError::UnknownResponse {
                task_id: task_id.into(),
                response_id: submission.response_id.clone(),
            })?;
        let weight = if self.tasks.raters(task_id) >= 2 { 0.5 } else { 1.0 };
        let record = AnnotationRecord {
            task_id: task_id.to_string(),
            annotator_id: annotator.to_string(),
            response_id: response.response_id.clone(),
            post_id: Some(task.post.id.clone()),
            approach: Some(response.approach.clone()),
            labels: task.labels.clone(),
            phase: task.phase,
            weight,
            rubric: submission.rubric,
            explanation: submission.explanation,
            started_at: submission.started_at,
            submitted_at: Utc::now(),
        };
        record.validate().map_err(|e| WorkbenchError::Validation(e.to_string()))?;

        let mut done = self.done.lock().expect("workbench lock poisoned");
        let key = (record.task_id.clone(), record.annotator_id.clone(), record.response_id.clone());
        if done.contains(&key) {
            return Err(WorkbenchError::Conflict);
        }
        self.store.append(&record)?;
        done.insert(key);
        Ok(record)
    }
}
