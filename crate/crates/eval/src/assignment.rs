//! Annotation task assignment with within-pair overlap.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::Phase;

/// How many tasks each pair shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlap {
    /// Exactly this many shared tasks per pair.
    Count(usize),
    /// Shared tasks as a fraction of each annotator's quota, rounded.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("no annotator pairs")]
    NoAnnotators,
    #[error("annotator {0} appears more than once")]
    DuplicateAnnotator(String),
    #[error("{tasks} tasks cannot cover {pairs} pairs sharing {shared} tasks each plus at least one own task per annotator")]
    InfeasibleAssignment { tasks: usize, pairs: usize, shared: usize },
    #[error("overlap fraction {0} is not in [0, 1)")]
    BadFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub annotators: Vec<String>,
    pub phase: Phase,
}

impl AnnotationTask {
    /// Per-annotation weight: 0.5 when two annotators share the task.
    pub fn weight(&self) -> f64 {
        if self.annotators.len() >= 2 {
            0.5
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub tasks: Vec<AnnotationTask>,
    /// Each annotator's tasks in the order they will be served.
    pub per_annotator: BTreeMap<String, Vec<String>>,
    pub shared_per_pair: usize,
}

fn shared_count(overlap: Overlap, tasks: usize, pairs: usize) -> Result<usize, AssignmentError> {
    match overlap {
        Overlap::Count(n) => Ok(n),
        Overlap::Fraction(f) if (0.0..1.0).contains(&f) => {
            // Quota q = (T + P s) / 2P with s = round(f q); iterate to a fixed point.
            let mut s = 0usize;
            for _ in 0..64 {
                let quota = (tasks + pairs * s) as f64 / (2 * pairs) as f64;
                let next = (f * quota).round() as usize;
                if next == s {
                    break;
                }
                s = next;
            }
            Ok(s)
        }
        Overlap::Fraction(f) => Err(AssignmentError::BadFraction(f)),
    }
}

/// Splits `task_ids` over annotator pairs. Every pair shares the same
/// number of tasks; the remaining tasks go to single annotators as evenly
/// as possible. Deterministic for a given seed.
pub fn assign_tasks(
    task_ids: &[String],
    pairs: &[(String, String)],
    overlap: Overlap,
    seed: u64,
) -> Result<Assignment, AssignmentError> {
    if pairs.is_empty() {
        return Err(AssignmentError::NoAnnotators);
    }
    let mut seen = std::collections::HashSet::new();
    for (a, b) in pairs {
        for name in [a, b] {
            if !seen.insert(name) {
                return Err(AssignmentError::DuplicateAnnotator(name.clone()));
            }
        }
    }
    let shared = shared_count(overlap, task_ids.len(), pairs.len())?;
    let annotators = 2 * pairs.len();
    let needed = pairs.len() * shared + annotators;
    if task_ids.len() < needed {
        return Err(AssignmentError::InfeasibleAssignment {
            tasks: task_ids.len(),
            pairs: pairs.len(),
            shared,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = task_ids.to_vec();
    pool.shuffle(&mut rng);
    let mut order: Vec<&String> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    order.shuffle(&mut rng);

    let mut tasks = Vec::with_capacity(task_ids.len());
    let mut per_annotator: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut next = pool.into_iter();
    for (a, b) in pairs {
        for _ in 0..shared {
            let id = next.next().expect("feasibility checked");
            per_annotator.entry(a.clone()).or_default().push(id.clone());
            per_annotator.entry(b.clone()).or_default().push(id.clone());
            tasks.push(AnnotationTask {
                task_id: id,
                annotators: vec![a.clone(), b.clone()],
                phase: Phase::Main,
            });
        }
    }
    for (i, id) in next.enumerate() {
        let annotator = order[i % annotators];
        per_annotator.entry(annotator.clone()).or_default().push(id.clone());
        tasks.push(AnnotationTask {
            task_id: id,
            annotators: vec![annotator.clone()],
            phase: Phase::Main,
        });
    }
    for list in per_annotator.values_mut() {
        list.shuffle(&mut rng);
    }
    tasks.sort_by(|x, y| x.task_id.cmp(&y.task_id));
    Ok(Assignment {
        tasks,
        per_annotator,
        shared_per_pair: shared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("task{i:03}")).collect()
    }

    fn pairs(n: usize) -> Vec<(String, String)> {
        (0..n).map(|i| (format!("e{}", 2 * i), format!("e{}", 2 * i + 1))).collect()
    }

    #[test]
    fn study_shape() {
        let a = assign_tasks(&ids(232), &pairs(5), Overlap::Count(7), 7).unwrap();
        assert_eq!(a.tasks.len(), 232);
        for list in a.per_annotator.values() {
            assert!(list.len() == 26 || list.len() == 27, "{}", list.len());
        }
        assert_eq!(a.tasks.iter().filter(|t| t.annotators.len() == 2).count(), 35);
        assert_eq!(a, assign_tasks(&ids(232), &pairs(5), Overlap::Count(7), 7).unwrap());
    }

    #[test]
    fn fraction_rounds_on_quota() {
        let a = assign_tasks(&ids(232), &pairs(5), Overlap::Fraction(0.3), 1).unwrap();
        assert_eq!(a.shared_per_pair, 8);
    }

    #[test]
    fn infeasible() {
        assert!(matches!(
            assign_tasks(&ids(1), &pairs(1), Overlap::Count(7), 0),
            Err(AssignmentError::InfeasibleAssignment { .. })
        ));
    }
}
