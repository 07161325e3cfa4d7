//! Response generation, the output validator and the no-evidence template.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;
use url::Url;

use crate::domain::{CorrectionResponse, Diagnostics, EvidenceItem, InformativeDescription, Post, ValidationFlag};
use crate::gateway::{ProviderError, Session};
use crate::prompts::{response_context, RESPONSE_PROMPT};
use crate::text::find_urls;

pub const RESPONSE_OPENER: &str = "This tweet is";

pub const NO_EVIDENCE_OPENER: &str = "No credible evidence was found";

/// Fixed reply when nothing credible and relevant turned up: states the
/// lack of evidence, the uncertainty, and nudges the reader to weigh
/// accuracy before sharing.
pub const NO_EVIDENCE_TEXT: &str = "No credible evidence was found to confirm or refute this tweet at the time of this response. \
The available information is uncertain, so the tweet should not be treated as either accurate or inaccurate yet. \
Before sharing it, consider whether the claim is accurate and whether it comes from a reliable source.";

const CORRECTION_NOTE: &str = "Your previous reply did not follow the requirements. Start the response with 'This tweet is' and do not number the URLs.";

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("response violated the output format twice: {flags:?}")]
    FormatViolation { text: String, flags: Vec<ValidationFlag> },
}

static NUMBERED_URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?mi)(?:^[ \t]*(?:\(?\d{1,3}[.)\]:]|\[\d{1,3}\])[ \t]*|\[\d{1,3}\][ \t]*|\(\d{1,3}\)[ \t]*)(?P<url>https?://|www\.)").unwrap()
});

/// Validator findings for one generated text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub flags: Vec<ValidationFlag>,
    /// Supported URLs in first-mention order, spelled as in the evidence.
    pub references: Vec<String>,
}

impl Validation {
    /// Violations that trigger a retry: missing opener or numbered URLs.
    pub fn format_violations(&self) -> Vec<ValidationFlag> {
        self.flags
            .iter()
            .filter(|f| matches!(f, ValidationFlag::MissingOpener | ValidationFlag::NumberedUrl { .. }))
            .cloned()
            .collect()
    }
}

fn same_url(a: &Url, b: &str) -> bool {
    match Url::parse(b) {
        Ok(b) => a == &b || a.as_str().trim_end_matches('/') == b.as_str().trim_end_matches('/'),
        Err(_) => false,
    }
}

pub fn validate(text: &str, evidence: &[EvidenceItem]) -> Validation {
    let mut validation = Validation::default();
    if !text.trim_start().starts_with(RESPONSE_OPENER) {
        validation.flags.push(ValidationFlag::MissingOpener);
    }
    let numbered_starts: Vec<usize> = NUMBERED_URL_RE
        .captures_iter(text)
        .filter_map(|c| c.name("url").map(|m| m.start()))
        .collect();
    for (range, raw) in find_urls(text) {
        let href = if raw.starts_with("www.") {
            format!("https://{raw}")
        } else {
            raw.to_string()
        };
        if numbered_starts.contains(&range.start) {
            validation.flags.push(ValidationFlag::NumberedUrl { url: raw.to_string() });
        }
        match evidence.iter().find(|e| same_url(&e.source_url, &href)) {
            Some(item) => {
                let canonical = item.source_url.to_string();
                if !validation.references.contains(&canonical) {
                    validation.references.push(canonical);
                }
            }
            None => validation.flags.push(ValidationFlag::UnsupportedUrl { url: raw.to_string() }),
        }
    }
    validation
}

/// Generates the correction. Format violations get one retry with a
/// corrective note; a second violation is an error.
pub async fn generate(
    session: &Session,
    post: &Post,
    descriptions: &[InformativeDescription],
    evidence: &[EvidenceItem],
) -> Result<CorrectionResponse, ResponseError> {
    let context = response_context(post, descriptions, evidence);
    let first = session.chat(RESPONSE_PROMPT, &context).await?;
    let mut validation = validate(&first, evidence);
    let mut text = first;
    let violations = validation.format_violations();
    if !violations.is_empty() {
        let retry_context = format!("{context}\n\n{CORRECTION_NOTE}");
        let second = session.chat(RESPONSE_PROMPT, &retry_context).await?;
        let second_validation = validate(&second, evidence);
        if !second_validation.format_violations().is_empty() {
            return Err(ResponseError::FormatViolation {
                text: second,
                flags: second_validation.flags,
            });
        }
        text = second;
        validation = second_validation;
        validation.flags.insert(0, ValidationFlag::Retried { violations });
    }
    Ok(CorrectionResponse {
        text: text.trim().to_string(),
        references: validation.references,
        evidence_trail: evidence.to_vec(),
        lack_of_evidence: false,
        flags: validation.flags,
        diagnostics: Diagnostics::default(),
    })
}

pub fn generate_no_evidence(_post: &Post) -> CorrectionResponse {
    CorrectionResponse {
        text: NO_EVIDENCE_TEXT.to_string(),
        references: Vec::new(),
        evidence_trail: Vec::new(),
        lack_of_evidence: true,
        flags: Vec::new(),
        diagnostics: Diagnostics::default(),
    }
}
