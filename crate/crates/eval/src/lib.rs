//! Evaluation of correction quality: the rubric, crowd-note helpfulness
//! classes, task assignment, weighted aggregation, agreement and the
//! statistics behind grouped comparisons.

pub mod agreement;
pub mod aggregate;
pub mod assignment;
pub mod helpfulness;
pub mod replay;
pub mod report;
pub mod rubric;
pub mod stats;
pub mod store;
pub mod workbench;

pub use agreement::{observed_agreement, weighted_kappa, Kappa, Weighting};
pub use aggregate::{response_scores, summarize};
pub use assignment::{assign_tasks, Overlap};
pub use helpfulness::{classify_helpfulness, HelpfulnessClass};
pub use report::{report, Report, ReportOptions};
pub use rubric::{Criterion, Rubric};
pub use stats::{mann_whitney_u, spearman_rho};
pub use store::{AnnotationRecord, AnnotationStore};
