//! Grouped comparison reports: weighted summaries, pairwise Mann-Whitney
//! tests and Spearman tables, as JSON and as a flat CSV.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{response_scores, summarize, AggregateError, ApproachSummary};
use crate::rubric::Criterion;
use crate::stats::{mann_whitney_u, spearman_rho, MannWhitney};
use crate::store::{AnnotationRecord, Phase};

/// Post labels the report knows how to group by.
pub const GROUPINGS: [&str; 5] = ["modality", "fact_checked", "leaning", "domain", "tactic"];

/// Overall quality, scaled to [0, 1], at or below which a rating counts as
/// low quality in the split Spearman table.
pub const QUALITY_SPLIT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown grouping {0:?}")]
    UnknownGrouping(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub group_by: Option<String>,
    pub criteria: Vec<Criterion>,
    pub quality_split: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            group_by: None,
            criteria: Criterion::ALL.to_vec(),
            quality_split: QUALITY_SPLIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub n_a: usize,
    pub n_b: usize,
    #[serde(flatten)]
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub approaches: Vec<ApproachSummary>,
    pub pairwise: Vec<PairwiseTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Label value, `None` for the ungrouped report.
    pub group: Option<String>,
    pub criteria: Vec<CriterionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub criterion: Criterion,
    pub n: usize,
    pub rho: Option<f64>,
    pub n_low: usize,
    pub rho_low: Option<f64>,
    pub n_high: usize,
    pub rho_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub group_by: Option<String>,
    pub groups: Vec<GroupReport>,
    pub spearman: Vec<SpearmanRow>,
}

fn criterion_report(records: &[AnnotationRecord], criterion: Criterion) -> Result<CriterionReport, ReportError> {
    let approaches = summarize(records, criterion)?;
    let mut per_approach: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for score in response_scores(records, criterion)? {
        per_approach.entry(score.approach).or_default().push(score.value);
    }
    let names: Vec<&String> = per_approach.keys().collect();
    let mut pairwise = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (xa, xb) = (&per_approach[*a], &per_approach[*b]);
            if let Ok(test) = mann_whitney_u(xa, xb) {
                pairwise.push(PairwiseTest {
                    a: (*a).clone(),
                    b: (*b).clone(),
                    n_a: xa.len(),
                    n_b: xb.len(),
                    test,
                });
            }
        }
    }
    Ok(CriterionReport {
        criterion,
        approaches,
        pairwise,
    })
}

/// Correlation of each criterion with overall quality over individual
/// annotations, overall and split at `split` (overall / 10).
fn spearman_table(records: &[AnnotationRecord], criteria: &[Criterion], split: f64) -> Vec<SpearmanRow> {
    let main: Vec<&AnnotationRecord> = records.iter().filter(|r| r.phase == Phase::Main).collect();
    criteria
        .iter()
        .filter(|c| **c != Criterion::Overall)
        .map(|&criterion| {
            let mut all = (Vec::new(), Vec::new());
            let mut low = (Vec::new(), Vec::new());
            let mut high = (Vec::new(), Vec::new());
            for r in &main {
                let Some(value) = criterion.value(&r.rubric) else {
                    continue;
                };
                let overall = f64::from(r.rubric.overall);
                all.0.push(overall);
                all.1.push(value);
                let side = if overall / 10.0 <= split { &mut low } else { &mut high };
                side.0.push(overall);
                side.1.push(value);
            }
            let rho = |(x, y): &(Vec<f64>, Vec<f64>)| spearman_rho(x, y).ok();
            SpearmanRow {
                criterion,
                n: all.0.len(),
                rho: rho(&all),
                n_low: low.0.len(),
                rho_low: rho(&low),
                n_high: high.0.len(),
                rho_high: rho(&high),
            }
        })
        .collect()
}

pub fn report(records: &[AnnotationRecord], options: &ReportOptions) -> Result<Report, ReportError> {
    let groups = match &options.group_by {
        None => vec![GroupReport {
            group: None,
            criteria: options
                .criteria
                .iter()
                .map(|&c| criterion_report(records, c))
                .collect::<Result<_, _>>()?,
        }],
        Some(label) => {
            let present: BTreeSet<&str> = records
                .iter()
                .filter_map(|r| r.labels.get(label).map(String::as_str))
                .collect();
            if !GROUPINGS.contains(&label.as_str()) && present.is_empty() {
                return Err(ReportError::UnknownGrouping(label.clone()));
            }
            present
                .into_iter()
                .map(|value| {
                    let subset: Vec<AnnotationRecord> = records
                        .iter()
                        .filter(|r| r.labels.get(label).map(String::as_str) == Some(value))
                        .cloned()
                        .collect();
                    Ok(GroupReport {
                        group: Some(value.to_string()),
                        criteria: options
                            .criteria
                            .iter()
                            .map(|&c| criterion_report(&subset, c))
                            .collect::<Result<_, ReportError>>()?,
                    })
                })
                .collect::<Result<_, ReportError>>()?
        }
    };
    Ok(Report {
        group_by: options.group_by.clone(),
        groups,
        spearman: spearman_table(records, &options.criteria, options.quality_split),
    })
}

#[derive(Debug, Default, Serialize)]
struct CsvRow<'a> {
    section: &'a str,
    group: &'a str,
    criterion: &'a str,
    approach: &'a str,
    approach_b: &'a str,
    category: &'a str,
    n: Option<usize>,
    weight: Option<f64>,
    value: Option<f64>,
    sd: Option<f64>,
    u: Option<f64>,
    p: Option<f64>,
}

impl Report {
    /// One flat table: `summary` rows (means), `share` rows (category
    /// proportions), `pairwise` rows (p-values) and `spearman` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for g in &self.groups {
            let group = g.group.as_deref().unwrap_or("all");
            for c in &g.criteria {
                let criterion = c.criterion.id();
                for a in &c.approaches {
                    w.serialize(CsvRow {
                        section: "summary",
                        group,
                        criterion,
                        approach: &a.approach,
                        n: Some(a.responses),
                        weight: Some(a.summary.weight),
                        value: Some(a.summary.mean),
                        sd: a.summary.sd,
                        ..Default::default()
                    })
                    .expect("csv row");
                    for (category, share) in &a.distribution {
                        w.serialize(CsvRow {
                            section: "share",
                            group,
                            criterion,
                            approach: &a.approach,
                            category,
                            value: Some(*share),
                            ..Default::default()
                        })
                        .expect("csv row");
                    }
                }
                for t in &c.pairwise {
                    w.serialize(CsvRow {
                        section: "pairwise",
                        group,
                        criterion,
                        approach: &t.a,
                        approach_b: &t.b,
                        n: Some(t.n_a + t.n_b),
                        u: Some(t.test.u),
                        p: Some(t.test.p),
                        ..Default::default()
                    })
                    .expect("csv row");
                }
            }
        }
        for row in &self.spearman {
            for (category, n, rho) in [
                ("all", row.n, row.rho),
                ("low", row.n_low, row.rho_low),
                ("high", row.n_high, row.rho_high),
            ] {
                w.serialize(CsvRow {
                    section: "spearman",
                    group: "all",
                    criterion: row.criterion.id(),
                    category,
                    n: Some(n),
                    value: rho,
                    ..Default::default()
                })
                .expect("csv row");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}
