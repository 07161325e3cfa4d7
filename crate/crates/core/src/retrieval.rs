//! Query generation, search, relevance scoring and the publication-time gate.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::credibility::{Registry, Scope};
use crate::domain::{InformativeDescription, PipelineConfig, Post, Priority, Query, RetrievedPage};
use crate::gateway::{PageContent, ProviderError, Session};
use crate::prompts::{query_prompt, tweet_context_brief};
use crate::text::strip_urls_and_emoji;

/// Asks the chat model for up to `n` search queries. A "none" reply yields
/// no queries.
pub async fn generate_queries(
    session: &Session,
    post: &Post,
    descriptions: &[InformativeDescription],
    n: usize,
) -> Result<Vec<Query>, ProviderError> {
    let reply = session
        .chat(&query_prompt(n), &tweet_context_brief(post, descriptions))
        .await?;
    Ok(parse_queries(&reply, n)
        .into_iter()
        .map(|text| Query {
            text,
            origin_post: post.id.clone(),
        })
        .collect())
}

fn is_none_reply(text: &str) -> bool {
    let t = text
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '`')
        .trim();
    t.eq_ignore_ascii_case("none")
}

/// One query per line, list markers and wrapping quotes removed, URLs and
/// emoji stripped, case-insensitive duplicates dropped.
pub fn parse_queries(reply: &str, n: usize) -> Vec<String> {
    if is_none_reply(reply) {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for line in reply.lines() {
        let line = line.trim();
        let line = line
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .trim_start_matches(['.', ')', ':'])
            .trim_start_matches(['-', '*', '•'])
            .trim();
        let line = line.trim_matches(|c: char| c == '"' || c == '\u{201C}' || c == '\u{201D}');
        let cleaned = strip_urls_and_emoji(line);
        if cleaned.is_empty() || is_none_reply(&cleaned) {
            continue;
        }
        if seen.insert(cleaned.to_lowercase()) {
            out.push(cleaned);
        }
        if out.len() == n {
            break;
        }
    }
    out
}

/// Keeps at most `cap` URLs of each priority tier, preserving order.
pub fn cap_per_tier(urls: Vec<Url>, registry: &Registry, cap: usize) -> Vec<Url> {
    let mut counts: BTreeMap<Priority, usize> = BTreeMap::new();
    urls.into_iter()
        .filter(|url| {
            let count = counts.entry(registry.priority_of(url)).or_insert(0);
            *count += 1;
            *count <= cap
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOutcome {
    pub urls: Vec<Url>,
    pub failures: Vec<String>,
}

/// Text search per query and reverse-image search per post image, each
/// capped per priority tier, then merged in first-seen order.
pub async fn run_search(
    session: &Session,
    queries: &[Query],
    post: &Post,
    registry: &Registry,
    scope: &Scope,
    config: &PipelineConfig,
) -> SearchOutcome {
    let cap = config.max_links_same_priority;
    let text_results: Vec<Result<Vec<Url>, String>> = stream::iter(queries.iter().cloned())
        .map(|query| async move {
            session
                .search_text(&query, scope)
                .await
                .map(|urls| cap_per_tier(urls, registry, cap))
                .map_err(|e| format!("search for {:?} failed: {e}", query.text))
        })
        .buffered(config.parallelism)
        .collect()
        .await;
    let image_results: Vec<Result<Vec<Url>, String>> = stream::iter(post.images.iter().cloned())
        .map(|image| async move {
            session
                .search_reverse_image(&image, config.reverse_image_max_pages)
                .await
                .map(|urls| {
                    let in_scope = urls.into_iter().filter(|u| scope.contains_url(u)).collect();
                    cap_per_tier(in_scope, registry, cap)
                })
                .map_err(|e| format!("reverse image search for {} failed: {e}", image.uri))
        })
        .buffered(config.parallelism)
        .collect()
        .await;

    let mut outcome = SearchOutcome::default();
    let mut seen = HashSet::new();
    for result in text_results.into_iter().chain(image_results) {
        match result {
            Ok(urls) => {
                for url in urls {
                    if seen.insert(url.clone()) {
                        outcome.urls.push(url);
                    }
                }
            }
            Err(message) => outcome.failures.push(message),
        }
    }
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    TextAboveThreshold,
    MultimodalTextAbove,
    VisualAbove,
    BelowAll,
    Undated,
    AfterCutoff,
}

impl VerdictReason {
    pub fn keeps(self) -> bool {
        matches!(
            self,
            VerdictReason::TextAboveThreshold | VerdictReason::MultimodalTextAbove | VerdictReason::VisualAbove
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub text_relevance: f64,
    pub visual_relevance: Option<f64>,
    pub kept: bool,
    pub reason: VerdictReason,
}

impl RelevanceVerdict {
    fn new(text_relevance: f64, visual_relevance: Option<f64>, reason: VerdictReason) -> Self {
        Self {
            text_relevance,
            visual_relevance,
            kept: reason.keeps(),
            reason,
        }
    }
}

/// Threshold rule. Text-only posts need text relevance at or above the text
/// threshold; posts with images need the higher multimodal text threshold
/// or visual relevance at or above the visual threshold.
pub fn relevance_verdict(
    text_relevance: f64,
    visual_relevance: Option<f64>,
    multimodal: bool,
    config: &PipelineConfig,
) -> RelevanceVerdict {
    let reason = if !multimodal {
        if text_relevance >= config.text_relevance_threshold {
            VerdictReason::TextAboveThreshold
        } else {
            VerdictReason::BelowAll
        }
    } else if text_relevance >= config.multimodal_text_threshold {
        VerdictReason::MultimodalTextAbove
    } else if visual_relevance.is_some_and(|v| v >= config.visual_threshold) {
        VerdictReason::VisualAbove
    } else {
        VerdictReason::BelowAll
    };
    RelevanceVerdict::new(text_relevance, visual_relevance, reason)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let norm = dot(a, a).sqrt() * dot(b, b).sqrt();
    if norm == 0.0 {
        0.0
    } else {
        (dot(a, b) / norm).clamp(-1.0, 1.0)
    }
}

/// Embeddings of a post, computed once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct PostEmbeddings {
    /// `None` when the post has no text left after cleaning and no image
    /// descriptions to stand in for it.
    pub text: Option<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
}

/// Text used to represent the post for relevance: URLs and emoji removed.
/// Image-only posts fall back to their image descriptions.
pub fn relevance_text(post: &Post, descriptions: &[InformativeDescription]) -> String {
    let cleaned = strip_urls_and_emoji(&post.text);
    if !cleaned.is_empty() {
        return cleaned;
    }
    descriptions
        .iter()
        .map(|d| d.description.trim())
        .filter(|d| !d.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub async fn embed_post(
    session: &Session,
    post: &Post,
    descriptions: &[InformativeDescription],
) -> Result<PostEmbeddings, ProviderError> {
    let text = relevance_text(post, descriptions);
    let text = if text.is_empty() {
        None
    } else {
        Some(session.embed_text(&text).await?)
    };
    let mut images = Vec::with_capacity(post.images.len());
    for image in &post.images {
        images.push(session.embed_image(image).await?);
    }
    Ok(PostEmbeddings { text, images })
}

/// Scores a page against the post. Visual relevance is the best cosine
/// over the post's images.
pub async fn score_relevance(
    session: &Session,
    post: &Post,
    post_embeddings: &PostEmbeddings,
    page: &PageContent,
    config: &PipelineConfig,
) -> Result<RelevanceVerdict, ProviderError> {
    let text_relevance = match &post_embeddings.text {
        Some(post_vec) => dot(post_vec, &session.embed_text(&page.main_text).await?),
        None => 0.0,
    };
    let visual_relevance = match (&page.main_image, post_embeddings.images.is_empty()) {
        (Some(page_image), false) => {
            let page_vec = session.embed_image(page_image).await?;
            post_embeddings
                .images
                .iter()
                .map(|v| cosine(v, &page_vec))
                .max_by(f64::total_cmp)
        }
        _ => None,
    };
    Ok(relevance_verdict(text_relevance, visual_relevance, post.has_images(), config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GateMode {
    /// Cutoff is the post's creation time.
    PostTime,
    /// Cutoff is `minutes` before a reference instant.
    MinutesBeforeReference { reference: DateTime<Utc>, minutes: i64 },
    /// Cutoff given directly.
    Explicit,
}

/// Only pages published strictly before `cutoff` pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGate {
    pub cutoff: DateTime<Utc>,
    pub mode: GateMode,
}

impl TimeGate {
    pub fn post_time(post: &Post) -> Self {
        Self {
            cutoff: post.created_at,
            mode: GateMode::PostTime,
        }
    }

    pub fn before_reference(reference: DateTime<Utc>, minutes: i64) -> Self {
        Self {
            cutoff: reference - Duration::minutes(minutes),
            mode: GateMode::MinutesBeforeReference { reference, minutes },
        }
    }

    pub fn explicit(cutoff: DateTime<Utc>) -> Self {
        Self {
            cutoff,
            mode: GateMode::Explicit,
        }
    }

    /// `None` when the page passes, otherwise the reason it is dropped.
    pub fn reject_reason(&self, published_at: Option<DateTime<Utc>>) -> Option<VerdictReason> {
        match published_at {
            None => Some(VerdictReason::Undated),
            Some(t) if t >= self.cutoff => Some(VerdictReason::AfterCutoff),
            Some(_) => None,
        }
    }
}

pub fn apply_time_gate(pages: Vec<RetrievedPage>, gate: &TimeGate) -> Vec<RetrievedPage> {
    pages
        .into_iter()
        .filter(|p| gate.reject_reason(p.published_at).is_none())
        .collect()
}

/// Minutes subtracted from a reference time by default.
pub const DEFAULT_GATE_MINUTES: i64 = 30;

/// How a run picks its time gate, fixed before any search is issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatePolicy {
    /// No gate: undated pages are kept.
    Disabled,
    PostTime,
    /// Thirty minutes (by default) before a reference instant.
    BeforeReference { reference: DateTime<Utc>, minutes: i64 },
    Explicit(DateTime<Utc>),
}

impl GatePolicy {
    pub fn resolve(&self, post: &Post) -> Option<TimeGate> {
        match *self {
            GatePolicy::Disabled => None,
            GatePolicy::PostTime => Some(TimeGate::post_time(post)),
            GatePolicy::BeforeReference { reference, minutes } => Some(TimeGate::before_reference(reference, minutes)),
            GatePolicy::Explicit(cutoff) => Some(TimeGate::explicit(cutoff)),
        }
    }
}

impl fmt::Display for GatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GatePolicy::Disabled => f.write_str("none"),
            GatePolicy::PostTime => f.write_str("post-time"),
            GatePolicy::BeforeReference { reference, minutes } if *minutes == DEFAULT_GATE_MINUTES => {
                write!(f, "before:{}", reference.to_rfc3339())
            }
            GatePolicy::BeforeReference { reference, minutes } => {
                write!(f, "before:{}:{minutes}m", reference.to_rfc3339())
            }
            GatePolicy::Explicit(cutoff) => f.write_str(&cutoff.to_rfc3339()),
        }
    }
}

impl FromStr for GatePolicy {
    type Err = String;

    /// `none`, `post-time`, `before:<RFC3339>[:<N>m]` or an RFC 3339 cutoff.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            DateTime::parse_from_rfc3339(t)
                .map(|d| d.with_timezone(&Utc))
                .map_err(|e| format!("invalid timestamp {t:?}: {e}"))
        };
        match s.trim() {
            "none" => Ok(GatePolicy::Disabled),
            "post-time" => Ok(GatePolicy::PostTime),
            other => match other.strip_prefix("before:") {
                Some(rest) => {
                    let (stamp, minutes) = match rest.rsplit_once(':') {
                        Some((stamp, m)) if m.ends_with('m') => {
                            let minutes = m
                                .trim_end_matches('m')
                                .parse()
                                .map_err(|_| format!("invalid minutes in {s:?}"))?;
                            (stamp, minutes)
                        }
                        _ => (rest, DEFAULT_GATE_MINUTES),
                    };
                    Ok(GatePolicy::BeforeReference {
                        reference: parse(stamp)?,
                        minutes,
                    })
                }
                None => parse(other).map(GatePolicy::Explicit),
            },
        }
    }
}

/// What happened to one search hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PageOutcome {
    Kept { page: RetrievedPage, verdict: RelevanceVerdict },
    Dropped { url: Url, verdict: RelevanceVerdict },
    Excluded { url: Url },
    Failed { url: Url, error: String },
}

/// Fetches one search hit, attaches credibility, applies the time gate and
/// then the relevance thresholds. The gate runs before scoring so that
/// out-of-window pages cost no embedding calls.
pub async fn fetch_and_score(
    session: &Session,
    post: &Post,
    post_embeddings: &PostEmbeddings,
    url: &Url,
    registry: &Registry,
    gate: Option<&TimeGate>,
    config: &PipelineConfig,
) -> PageOutcome {
    let Some(record) = registry.lookup(url).filter(|r| r.admitted()) else {
        return PageOutcome::Excluded { url: url.clone() };
    };
    let content = match session.extract_content(url).await {
        Ok(content) => content,
        Err(e) => {
            return PageOutcome::Failed {
                url: url.clone(),
                error: e.to_string(),
            }
        }
    };
    if let Some(reason) = gate.and_then(|g| g.reject_reason(content.published_at)) {
        return PageOutcome::Dropped {
            url: url.clone(),
            verdict: RelevanceVerdict::new(f64::NAN, None, reason).sanitized(),
        };
    }
    let verdict = match score_relevance(session, post, post_embeddings, &content, config).await {
        Ok(v) => v,
        Err(e) => {
            return PageOutcome::Failed {
                url: url.clone(),
                error: e.to_string(),
            }
        }
    };
    if !verdict.kept {
        return PageOutcome::Dropped { url: url.clone(), verdict };
    }
    PageOutcome::Kept {
        page: RetrievedPage {
            url: url.clone(),
            publisher_domain: record.domain.clone(),
            title: content.title,
            main_text: content.main_text,
            main_image: content.main_image,
            published_at: content.published_at,
            text_relevance: verdict.text_relevance,
            visual_relevance: verdict.visual_relevance,
            priority: record.priority(),
        },
        verdict,
    }
}

impl RelevanceVerdict {
    /// Unscored verdicts carry 0 rather than NaN so they serialize.
    fn sanitized(mut self) -> Self {
        if self.text_relevance.is_nan() {
            self.text_relevance = 0.0;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn query_parsing() {
        let reply = "1. \"Biden vaccine mandate 2021\"\n2. vaccine mandate https://t.co/x 💉\n3. biden VACCINE mandate 2021\n4. extra";
        assert_eq!(
            parse_queries(reply, 3),
            ["Biden vaccine mandate 2021", "vaccine mandate", "extra"]
        );
        assert!(parse_queries("None.", 3).is_empty());
        assert!(parse_queries("\"none\"", 5).is_empty());
    }

    #[test]
    fn verdict_boundaries() {
        let c = PipelineConfig::default();
        assert!(relevance_verdict(90.0, None, false, &c).kept);
        assert!(!relevance_verdict(89.99, None, false, &c).kept);
        assert_eq!(
            relevance_verdict(80.0, Some(0.75), true, &c).reason,
            VerdictReason::VisualAbove
        );
        assert_eq!(
            relevance_verdict(95.0, None, true, &c).reason,
            VerdictReason::MultimodalTextAbove
        );
        assert!(!relevance_verdict(94.9, Some(0.69), true, &c).kept);
    }

    #[test]
    fn gate_policy_round_trips() {
        let t = Utc.with_ymd_and_hms(2023, 4, 1, 12, 0, 0).unwrap();
        for policy in [
            GatePolicy::Disabled,
            GatePolicy::PostTime,
            GatePolicy::Explicit(t),
            GatePolicy::BeforeReference { reference: t, minutes: 30 },
            GatePolicy::BeforeReference { reference: t, minutes: 45 },
        ] {
            assert_eq!(policy.to_string().parse::<GatePolicy>().unwrap(), policy);
        }
        let gate = TimeGate::before_reference(t, 30);
        assert_eq!(gate.cutoff, Utc.with_ymd_and_hms(2023, 4, 1, 11, 30, 0).unwrap());
    }

    #[test]
    fn gate_boundaries() {
        let cutoff = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let gate = TimeGate::explicit(cutoff);
        assert_eq!(gate.reject_reason(Some(cutoff - Duration::seconds(1))), None);
        assert_eq!(gate.reject_reason(Some(cutoff)), Some(VerdictReason::AfterCutoff));
        assert_eq!(gate.reject_reason(None), Some(VerdictReason::Undated));
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
