//! Command implementations, kept apart from argument parsing so tests can
//! call them directly.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use veracity_core::domain::validate_post;
use veracity_core::evidence::GatherOutcome;
use veracity_core::{describer, run_batch, GatePolicy, Pipeline, RawPost, Retrieval, RetrievedPage, RunRecord, RunStatus, RunStore};
use veracity_eval::agreement::CriterionAgreement;
use veracity_eval::aggregate::ApproachSummary;
use veracity_eval::agreement::criterion_agreement;
use veracity_eval::{classify_helpfulness, summarize, AnnotationRecord, Criterion, HelpfulnessClass, Weighting};

/// Reads a file, or stdin for `-`.
pub fn read_input(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        return Ok(text);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Parses one post or an array of posts.
pub fn parse_posts(text: &str) -> anyhow::Result<Vec<RawPost>> {
    let value: Value = serde_json::from_str(text).context("posts are not valid JSON")?;
    let posts = match value {
        Value::Array(items) => items.into_iter().map(serde_json::from_value).collect::<Result<_, _>>(),
        other => serde_json::from_value(other).map(|p| vec![p]),
    };
    posts.context("posts do not match the post schema")
}

/// What `respond` prints for one record: the correction response, or the
/// whole record when asked.
pub fn render_record(record: &RunRecord, full: bool) -> anyhow::Result<Value> {
    if full {
        return Ok(serde_json::to_value(record)?);
    }
    match &record.response {
        Some(response) => Ok(serde_json::to_value(response)?),
        None => bail!(
            "post {} {}: {}",
            record.post_id,
            status_word(record.status),
            record.error.as_deref().unwrap_or("no response")
        ),
    }
}

fn status_word(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Rejected => "rejected",
        RunStatus::Failed => "failed",
    }
}

/// Runs every post and returns records in input order. Records go to
/// `store` when given; a stored record with the same id wins.
pub async fn respond(
    pipeline: &Pipeline,
    posts: Vec<RawPost>,
    policy: &GatePolicy,
    store: Option<&RunStore>,
) -> anyhow::Result<Vec<RunRecord>> {
    let records = run_batch(pipeline, posts, policy, pipeline.config().parallelism).await;
    match store {
        Some(store) => records
            .iter()
            .map(|r| store.put(r).map(|(stored, _)| stored).map_err(Into::into))
            .collect(),
        None => Ok(records),
    }
}

/// Pretty JSON of `respond` output: an object for one post, else an array.
pub fn respond_output(records: &[RunRecord], full: bool) -> anyhow::Result<String> {
    let mut values = records.iter().map(|r| render_record(r, full)).collect::<anyhow::Result<Vec<_>>>()?;
    let value = if values.len() == 1 { values.remove(0) } else { Value::Array(values) };
    Ok(serde_json::to_string_pretty(&value)?)
}

pub async fn retrieve(pipeline: &Pipeline, raw: RawPost, policy: &GatePolicy) -> anyhow::Result<Retrieval> {
    let gateway = pipeline.gateway();
    let post = validate_post(raw, gateway.image_source(), gateway.images()).await?;
    Ok(pipeline.retrieve(&post, policy).await)
}

/// Accepts either a ranked page list or a full `retrieve` output.
pub fn parse_pages(text: &str) -> anyhow::Result<Vec<RetrievedPage>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Pages {
        List(Vec<RetrievedPage>),
        Retrieval(Retrieval),
    }
    Ok(match serde_json::from_str(text).context("pages are neither a page list nor a retrieval")? {
        Pages::List(pages) => pages,
        Pages::Retrieval(r) => r.ranked,
    })
}

pub async fn extract(pipeline: &Pipeline, raw: RawPost, pages: &[RetrievedPage]) -> anyhow::Result<GatherOutcome> {
    let gateway = pipeline.gateway();
    let post = validate_post(raw, gateway.image_source(), gateway.images()).await?;
    Ok(pipeline.extract(&post, pages).await)
}

pub async fn describe_image(pipeline: &Pipeline, uri: &str) -> anyhow::Result<Value> {
    let gateway = pipeline.gateway();
    let bytes = gateway
        .image_source()
        .fetch(uri)
        .await
        .map_err(|e| anyhow::anyhow!("fetching {uri}: {e}"))?;
    let image = gateway.images().insert(uri, bytes)?;
    let description = describer::describe(&gateway.session(), &image).await?;
    Ok(serde_json::to_value(description)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub by_status: BTreeMap<String, usize>,
    pub with_evidence: usize,
    pub mean_evidence_items: f64,
}

/// Summary of a run store: counts by status and evidence coverage.
pub fn summarize_runs(store: &RunStore) -> anyhow::Result<RunSummary> {
    let mut by_status = BTreeMap::new();
    let mut with_evidence = 0;
    let mut items = 0usize;
    let entries = store.list()?;
    for entry in &entries {
        *by_status.entry(status_word(entry.status).to_string()).or_insert(0) += 1;
        if let Some(response) = store.get(&entry.run_id)?.and_then(|r| r.response) {
            if !response.evidence_trail.is_empty() {
                with_evidence += 1;
            }
            items += response.evidence_trail.len();
        }
    }
    Ok(RunSummary {
        runs: entries.len(),
        by_status,
        with_evidence,
        mean_evidence_items: if entries.is_empty() { 0.0 } else { items as f64 / entries.len() as f64 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    pub approaches: Vec<ApproachSummary>,
}

/// Weighted per-approach summaries for the chosen criteria.
pub fn evaluate(records: &[AnnotationRecord], criteria: &[Criterion]) -> anyhow::Result<Vec<CriterionSummary>> {
    criteria
        .iter()
        .map(|&criterion| {
            Ok(CriterionSummary {
                criterion,
                approaches: summarize(records, criterion)?,
            })
        })
        .collect()
}

pub fn agreement(records: &[AnnotationRecord], criteria: &[Criterion], weighting: Weighting) -> Vec<CriterionAgreement> {
    criteria
        .iter()
        .map(|&c| criterion_agreement(records, c, weighting))
        .collect()
}

/// Parses `a,b,c` criterion ids; empty means all of them.
pub fn parse_criteria(list: Option<&str>) -> anyhow::Result<Vec<Criterion>> {
    match list {
        None => Ok(Criterion::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .filter(|c| !c.trim().is_empty())
            .map(|c| c.parse::<Criterion>().map_err(anyhow::Error::msg))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedScore {
    pub score: f64,
    pub class: HelpfulnessClass,
}

/// Classifies whitespace or comma separated helpfulness scores.
pub fn classify_scores(text: &str) -> anyhow::Result<Vec<ClassifiedScore>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let score: f64 = t.parse().with_context(|| format!("not a number: {t}"))?;
            Ok(ClassifiedScore {
                score,
                class: classify_helpfulness(score),
            })
        })
        .collect()
}
