//! Shared value types for posts, retrieved pages, evidence and responses.
//!
//! Everything here is an immutable value once constructed and is safe to
//! share across tasks.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ImageSource, ProviderCallRecord, ProviderKind, TokenUsage};
use crate::images::ImageStore;

/// Content-addressed reference to an image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageRef {
    pub uri: String,
    /// Lowercase hex SHA-256 of the image bytes.
    pub sha256: String,
}

/// A social-media item under scrutiny.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub images: Vec<ImageRef>,
    pub created_at: DateTime<Utc>,
    pub author_name: String,
    pub author_screen_name: String,
    pub author_description: String,
}

impl Post {
    pub fn has_images(&self) -> bool {
        !self.images.is_empty()
    }
}

/// Caption, recognized people and OCR text fused into one description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativeDescription {
    pub image: ImageRef,
    pub caption: String,
    pub celebrities: Vec<String>,
    pub ocr_text: String,
    pub description: String,
}

/// A search query generated from a post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub origin_post: String,
}

/// Publisher priority tier.
///
/// Variant order is the comparison order: `Excluded < Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Excluded,
    Low,
    Medium,
    High,
}

impl Priority {
    pub fn is_admitted(self) -> bool {
        self != Priority::Excluded
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Priority::Excluded => "excluded",
            Priority::Low => "low",
            Priority::Medium => "medium",
            Priority::High => "high",
        };
        f.write_str(s)
    }
}

/// A scraped web document with its relevance and credibility annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPage {
    pub url: url::Url,
    pub publisher_domain: String,
    pub title: String,
    pub main_text: String,
    pub main_image: Option<ImageRef>,
    pub published_at: Option<DateTime<Utc>>,
    pub text_relevance: f64,
    pub visual_relevance: Option<f64>,
    pub priority: Priority,
}

impl RetrievedPage {
    /// Ranking comparator: priority descending, then text relevance
    /// descending, then URL ascending.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .cmp(&self.priority)
            .then_with(|| other.text_relevance.total_cmp(&self.text_relevance))
            .then_with(|| self.url.as_str().cmp(other.url.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    ExplicitRefutation,
    ImplicitRefutation,
}

/// One verbatim passage quoted from a source page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub kind: EvidenceKind,
    /// Exact slice of the source page's truncated main text.
    pub quote: String,
    pub source_url: url::Url,
    pub source_priority: Priority,
    pub source_relevance: f64,
    pub published_at: Option<DateTime<Utc>>,
}

/// Problems the response validator found in generated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ValidationFlag {
    MissingOpener,
    NumberedUrl { url: String },
    UnsupportedUrl { url: String },
    /// The first attempt violated the format and a second attempt was made.
    Retried { violations: Vec<ValidationFlag> },
}

/// Generated correction plus its references and diagnostics trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResponse {
    pub text: String,
    pub references: Vec<String>,
    pub evidence_trail: Vec<EvidenceItem>,
    pub lack_of_evidence: bool,
    #[serde(default)]
    pub flags: Vec<ValidationFlag>,
    pub diagnostics: Diagnostics,
}

/// Per-run accounting.
///
/// Wall-clock measurements are kept in memory but not serialized, so the
/// JSON form of a response is reproducible under replay. Persisted timing
/// lives on the run record instead.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip)]
    pub wall_time: Duration,
    pub provider_calls: BTreeMap<ProviderKind, u64>,
    pub token_usage: TokenUsage,
    pub monetary_cost: f64,
    /// Portion of `monetary_cost` spent on lookahead extractions past the
    /// stop point.
    pub speculative_cost: f64,
    pub pages_searched: u64,
    pub pages_fetched: u64,
    pub pages_kept: u64,
    pub pages_extracted: u64,
    pub cutoff: Option<DateTime<Utc>>,
    pub registry_snapshot: String,
    /// Provider calls in canonical (kind, request digest) order.
    pub calls: Vec<ProviderCallRecord>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Folds call records into the aggregate counters. Records are sorted
    /// first so that the floating point sums do not depend on completion
    /// order.
    pub fn absorb_calls(&mut self, mut calls: Vec<ProviderCallRecord>) {
        calls.sort_by(|a, b| a.canonical_cmp(b));
        self.provider_calls.clear();
        self.token_usage = TokenUsage::default();
        self.monetary_cost = 0.0;
        self.speculative_cost = 0.0;
        for call in &calls {
            *self.provider_calls.entry(call.kind).or_insert(0) += 1;
            self.token_usage.input += call.tokens.input;
            self.token_usage.output += call.tokens.output;
            self.monetary_cost += call.cost;
            if call.speculative {
                self.speculative_cost += call.cost;
            }
        }
        self.calls = calls;
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }
}

/// Calibration identity for the relevance thresholds. Thresholds are only
/// meaningful for the embedders they were tuned against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub text_embedder: String,
    pub image_embedder: String,
}

impl Default for ThresholdCalibration {
    fn default() -> Self {
        Self {
            text_embedder: "msmarco-distilbert-base-tas-b".into(),
            image_embedder: "facebook/dino-vitb8".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub queries_text_only: usize,
    pub queries_with_images: usize,
    pub max_links_same_priority: usize,
    pub reverse_image_max_pages: usize,
    pub text_relevance_threshold: f64,
    pub multimodal_text_threshold: f64,
    pub visual_threshold: f64,
    pub max_page_chars: usize,
    pub refutation_stop_count: usize,
    pub parallelism: usize,
    /// Count only pages with an explicit refutation toward the stop rule.
    pub stop_on_explicit_only: bool,
    /// Prefetch extractions for the next `parallelism` ranked pages.
    pub speculative_lookahead: bool,
    pub calibration: ThresholdCalibration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            queries_text_only: 3,
            queries_with_images: 5,
            max_links_same_priority: 10,
            reverse_image_max_pages: 5,
            text_relevance_threshold: 90.0,
            multimodal_text_threshold: 95.0,
            visual_threshold: 0.7,
            max_page_chars: 20_000,
            refutation_stop_count: 2,
            parallelism: 5,
            stop_on_explicit_only: true,
            speculative_lookahead: false,
            calibration: ThresholdCalibration::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid pipeline config: {0}")]
pub struct ConfigError(pub String);

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("queries_text_only", self.queries_text_only),
            ("queries_with_images", self.queries_with_images),
            ("max_links_same_priority", self.max_links_same_priority),
            ("reverse_image_max_pages", self.reverse_image_max_pages),
            ("max_page_chars", self.max_page_chars),
            ("refutation_stop_count", self.refutation_stop_count),
            ("parallelism", self.parallelism),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(ConfigError(format!("{name} must be positive")));
            }
        }
        let thresholds = [
            ("text_relevance_threshold", self.text_relevance_threshold),
            ("multimodal_text_threshold", self.multimodal_text_threshold),
            ("visual_threshold", self.visual_threshold),
        ];
        for (name, value) in thresholds {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError(format!("{name} must be positive and finite")));
            }
        }
        if self.visual_threshold > 1.0 {
            return Err(ConfigError("visual_threshold is a cosine and must not exceed 1".into()));
        }
        Ok(())
    }

    /// Number of queries requested for a post.
    pub fn query_count(&self, post: &Post) -> usize {
        if post.has_images() {
            self.queries_with_images
        } else {
            self.queries_text_only
        }
    }
}

/// Post as it arrives on disk or over the wire.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawPost {
    pub id: Option<String>,
    pub text: Option<String>,
    pub created_at: Option<String>,
    #[serde(default)]
    pub author: RawAuthor,
    #[serde(default)]
    pub images: Vec<RawImage>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawAuthor {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub screen_name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawImage {
    pub uri: String,
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum PostError {
    #[error("malformed post: {0}")]
    MalformedPost(String),
    #[error("unreadable image {uri}: {reason}")]
    UnreadableImage { uri: String, reason: String },
}

impl RawPost {
    pub fn from_json(json: &str) -> Result<Self, PostError> {
        serde_json::from_str(json).map_err(|e| PostError::MalformedPost(e.to_string()))
    }
}

/// Checks a raw record and resolves its images into the store.
pub async fn validate_post(
    raw: RawPost,
    source: &dyn ImageSource,
    store: &ImageStore,
) -> Result<Post, PostError> {
    let id = raw
        .id
        .filter(|id| !id.trim().is_empty())
        .ok_or_else(|| PostError::MalformedPost("missing id".into()))?;
    let text = raw
        .text
        .ok_or_else(|| PostError::MalformedPost(format!("post {id}: missing text")))?;
    let created_at = raw
        .created_at
        .ok_or_else(|| PostError::MalformedPost(format!("post {id}: missing created_at")))?;
    let created_at = DateTime::parse_from_rfc3339(&created_at)
        .map_err(|e| PostError::MalformedPost(format!("post {id}: created_at: {e}")))?
        .with_timezone(&Utc);

    let mut images = Vec::with_capacity(raw.images.len());
    for image in raw.images {
        let bytes = source
            .fetch(&image.uri)
            .await
            .map_err(|reason| PostError::UnreadableImage {
                uri: image.uri.clone(),
                reason,
            })?;
        let reference = store
            .insert(&image.uri, bytes)
            .map_err(|e| PostError::UnreadableImage {
                uri: image.uri.clone(),
                reason: e.to_string(),
            })?;
        images.push(reference);
    }

    Ok(Post {
        id,
        text,
        images,
        created_at,
        author_name: raw.author.name,
        author_screen_name: raw.author.screen_name,
        author_description: raw.author.description,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_order() {
        assert!(Priority::High > Priority::Medium);
        assert!(Priority::Medium > Priority::Low);
        assert!(Priority::Low > Priority::Excluded);
        assert!(!Priority::Excluded.is_admitted());
    }

    #[test]
    fn default_config_is_valid() {
        PipelineConfig::default().validate().unwrap();
        let bad = PipelineConfig {
            parallelism: 0,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            visual_threshold: f64::NAN,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_fills_missing_fields_with_defaults() {
        let config: PipelineConfig = serde_json::from_str(r#"{"parallelism": 2}"#).unwrap();
        assert_eq!(config.parallelism, 2);
        assert_eq!(config.text_relevance_threshold, 90.0);
    }
}
