//! Evidence extraction over ranked pages with the early-stop rule.

use std::sync::LazyLock;

use futures::stream::{FuturesOrdered, StreamExt};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{EvidenceItem, EvidenceKind, InformativeDescription, PipelineConfig, Post, RetrievedPage};
use crate::gateway::{ProviderError, Session};
use crate::prompts::{extraction_context, EXTRACTION_PROMPT};
use crate::text::{find_normalized, truncate_at_whitespace};

/// Most quotes kept per kind per page.
pub const MAX_QUOTES_PER_KIND: usize = 2;

/// Sorts pages by priority, then relevance, then URL.
pub fn rank_pages(mut pages: Vec<RetrievedPage>) -> Vec<RetrievedPage> {
    pages.sort_by(RetrievedPage::rank_cmp);
    pages
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionVerdict {
    Refutes,
    ContextOnly,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub page: RetrievedPage,
    pub items: Vec<EvidenceItem>,
    pub verdict: ExtractionVerdict,
    /// Quotes the model returned that are not in the page text.
    pub discarded: Vec<String>,
}

impl ExtractionResult {
    fn from_items(page: RetrievedPage, items: Vec<EvidenceItem>, discarded: Vec<String>) -> Self {
        let verdict = if items.iter().any(|i| i.kind == EvidenceKind::ExplicitRefutation) {
            ExtractionVerdict::Refutes
        } else if items.is_empty() {
            ExtractionVerdict::None
        } else {
            ExtractionVerdict::ContextOnly
        };
        Self {
            page,
            items,
            verdict,
            discarded,
        }
    }
}

/// Raw quote candidates split by section of the extraction reply.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedReply {
    pub explicit: Vec<String>,
    pub implicit: Vec<String>,
}

static SECTION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:\*\*)?\s*(?:(1|2)\s*[.):]|(explicit|implicit)[^:]*:)\s*(?:\*\*)?\s*").unwrap()
});

static QUOTED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#""([^"]{2,})"|\u{201C}([^\u{201D}]{2,})\u{201D}"#).unwrap());

fn is_none(text: &str) -> bool {
    let t = text
        .trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '.' | '`' | '*' | '(' | ')'))
        .trim();
    t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("n/a")
}

/// Splits a reply into explicit and implicit candidates. Section markers
/// are "1." / "2." or "Explicit..:" / "Implicit..:"; text outside any marked
/// section counts as implicit.
pub fn parse_extraction_reply(reply: &str) -> ParsedReply {
    let mut parsed = ParsedReply::default();
    if is_none(reply) {
        return parsed;
    }
    let mut section = EvidenceKind::ImplicitRefutation;
    let mut current: Vec<String> = Vec::new();
    let flush = |kind: EvidenceKind, lines: &mut Vec<String>, parsed: &mut ParsedReply| {
        let target = match kind {
            EvidenceKind::ExplicitRefutation => &mut parsed.explicit,
            EvidenceKind::ImplicitRefutation => &mut parsed.implicit,
        };
        target.extend(lines.drain(..));
    };
    for line in reply.lines() {
        let mut body = line;
        if let Some(m) = SECTION_RE.captures(line) {
            let marker = m.get(1).or_else(|| m.get(2)).map(|g| g.as_str().to_ascii_lowercase());
            let kind = match marker.as_deref() {
                Some("1") | Some("explicit") => EvidenceKind::ExplicitRefutation,
                _ => EvidenceKind::ImplicitRefutation,
            };
            flush(section, &mut current, &mut parsed);
            section = kind;
            body = &line[m.get(0).unwrap().end()..];
        }
        let body = body.trim().trim_start_matches(['-', '*', '•']).trim();
        if body.is_empty() || is_none(body) {
            continue;
        }
        current.push(body.to_string());
    }
    flush(section, &mut current, &mut parsed);
    parsed
}

/// Candidate strings for one reply line: the whole line without wrapping
/// quotes, then each quoted segment inside it.
fn candidates(line: &str) -> Vec<String> {
    let mut out = vec![line
        .trim_matches(|c: char| matches!(c, '"' | '\u{201C}' | '\u{201D}'))
        .trim()
        .to_string()];
    for caps in QUOTED_RE.captures_iter(line) {
        if let Some(m) = caps.get(1).or_else(|| caps.get(2)) {
            out.push(m.as_str().trim().to_string());
        }
    }
    out
}

/// Keeps up to two verified quotes per kind. Each kept quote is the exact
/// slice of `text` the candidate matched.
pub fn verify_quotes(text: &str, parsed: &ParsedReply) -> (Vec<(EvidenceKind, String)>, Vec<String>) {
    let mut kept: Vec<(EvidenceKind, String)> = Vec::new();
    let mut discarded = Vec::new();
    for (kind, lines) in [
        (EvidenceKind::ExplicitRefutation, &parsed.explicit),
        (EvidenceKind::ImplicitRefutation, &parsed.implicit),
    ] {
        let mut count = 0;
        for line in lines {
            if count == MAX_QUOTES_PER_KIND {
                break;
            }
            let found = candidates(line)
                .into_iter()
                .filter(|c| !c.is_empty())
                .find_map(|c| find_normalized(text, &c));
            match found {
                Some(range) => {
                    let quote = text[range].to_string();
                    if !kept.iter().any(|(_, q)| *q == quote) {
                        kept.push((kind, quote));
                        count += 1;
                    }
                }
                None => {
                    tracing::debug!(quote = %line, "discarding quote not found in page");
                    discarded.push(line.clone());
                }
            }
        }
    }
    (kept, discarded)
}

/// Runs the extraction prompt on one page. The page text is cut to
/// `max_page_chars` first; only quotes found in the cut text survive.
pub async fn extract(
    session: &Session,
    page: &RetrievedPage,
    post: &Post,
    descriptions: &[InformativeDescription],
    config: &PipelineConfig,
) -> Result<ExtractionResult, ProviderError> {
    let text = truncate_at_whitespace(&page.main_text, config.max_page_chars);
    let context = extraction_context(text, page.published_at, post, descriptions);
    let reply = session.chat(EXTRACTION_PROMPT, &context).await?;
    let (kept, discarded) = verify_quotes(text, &parse_extraction_reply(&reply));
    let items = kept
        .into_iter()
        .map(|(kind, quote)| EvidenceItem {
            kind,
            quote,
            source_url: page.url.clone(),
            source_priority: page.priority,
            source_relevance: page.text_relevance,
            published_at: page.published_at,
        })
        .collect();
    Ok(ExtractionResult::from_items(page.clone(), items, discarded))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatherOutcome {
    /// Evidence in page rank order.
    pub items: Vec<EvidenceItem>,
    /// One result per page consulted before the stop point.
    pub results: Vec<ExtractionResult>,
    pub failures: Vec<String>,
}

fn counts_toward_stop(result: &ExtractionResult, config: &PipelineConfig) -> bool {
    match result.verdict {
        ExtractionVerdict::Refutes => true,
        ExtractionVerdict::ContextOnly => !config.stop_on_explicit_only,
        ExtractionVerdict::None => false,
    }
}

/// Extracts from ranked pages in order until `refutation_stop_count` pages
/// refute or pages run out.
///
/// With `speculative_lookahead`, up to `parallelism` next pages are
/// extracted ahead of the decision point. Decisions and output match the
/// sequential walk; lookahead calls past the stop point are finished,
/// discarded and tagged speculative in the call ledger.
pub async fn gather(
    session: &Session,
    pages: &[RetrievedPage],
    post: &Post,
    descriptions: &[InformativeDescription],
    config: &PipelineConfig,
) -> GatherOutcome {
    let window = if config.speculative_lookahead {
        config.parallelism.max(1)
    } else {
        1
    };
    let launch = |index: usize| {
        let child = session.child();
        let page = pages[index].clone();
        async move {
            let result = extract(&child, &page, post, descriptions, config).await;
            (child, page, result)
        }
    };

    let mut outcome = GatherOutcome::default();
    let mut in_flight = FuturesOrdered::new();
    let mut next = 0;
    while next < pages.len() && in_flight.len() < window {
        in_flight.push_back(launch(next));
        next += 1;
    }
    let mut refuting = 0;
    let mut stopped = false;
    while let Some((child, page, result)) = in_flight.next().await {
        session.absorb(&child, false);
        match result {
            Ok(result) => {
                if counts_toward_stop(&result, config) {
                    refuting += 1;
                }
                outcome.items.extend(result.items.iter().cloned());
                outcome.results.push(result);
            }
            Err(e) => outcome.failures.push(format!("extraction from {} failed: {e}", page.url)),
        }
        if refuting >= config.refutation_stop_count {
            stopped = true;
            break;
        }
        if next < pages.len() {
            in_flight.push_back(launch(next));
            next += 1;
        }
    }
    if stopped {
        while let Some((child, _, _)) = in_flight.next().await {
            session.absorb(&child, true);
        }
    }
    outcome
}
