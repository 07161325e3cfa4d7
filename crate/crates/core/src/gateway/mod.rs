//! Provider gateway.
//!
//! Every external capability (chat model, embedders, captioner, celebrity
//! recognizer, OCR, search engines, page extractor) is reached through a
//! [`Backend`]. The gateway wraps a backend with request digests, bounded
//! retry, per-kind in-flight limits, cost accounting and an optional
//! content-addressed response cache. A [`Session`] collects the
//! [`ProviderCallRecord`]s of one pipeline run.
//!
//! No other module performs network I/O.

mod cassette;
mod config;
mod extract;
mod live;
mod mock;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::Semaphore;
use url::Url;

use crate::credibility::Scope;
use crate::domain::{ImageRef, Query};
use crate::images::ImageStore;

pub use cassette::{Cassette, CassetteEntry, CassetteError, Outcome, RecordingBackend, ReplayBackend};
pub use config::{CostTable, ProviderSettings, ProvidersConfig, ProvidersConfigError, Protocol, RetryPolicy};
pub use extract::{extract_article, parse_date, Article, FetchedPage, HtmlExtractor, HttpFetcher, PageFetcher};
pub use live::{HttpImageSource, JsonAdapter, LocalImageSource, OpenAiChat, OpenAiEmbeddings, RoutedBackend};
pub use mock::{tiny_png, MockBackend};

/// Prompt prefix the captioner is conditioned on.
pub const CAPTION_PROMPT: &str = "A photo of";

/// Results per reverse-image search page.
pub const REVERSE_IMAGE_PAGE_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    ChatLlm,
    TextEmbedder,
    ImageEmbedder,
    Captioner,
    CelebrityRecognizer,
    Ocr,
    TextSearch,
    ReverseImageSearch,
    ContentExtractor,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 9] = [
        ProviderKind::ChatLlm,
        ProviderKind::TextEmbedder,
        ProviderKind::ImageEmbedder,
        ProviderKind::Captioner,
        ProviderKind::CelebrityRecognizer,
        ProviderKind::Ocr,
        ProviderKind::TextSearch,
        ProviderKind::ReverseImageSearch,
        ProviderKind::ContentExtractor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::ChatLlm => "chat_llm",
            ProviderKind::TextEmbedder => "text_embedder",
            ProviderKind::ImageEmbedder => "image_embedder",
            ProviderKind::Captioner => "captioner",
            ProviderKind::CelebrityRecognizer => "celebrity_recognizer",
            ProviderKind::Ocr => "ocr",
            ProviderKind::TextSearch => "text_search",
            ProviderKind::ReverseImageSearch => "reverse_image_search",
            ProviderKind::ContentExtractor => "content_extractor",
        }
    }
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProviderKind::ALL
            .into_iter()
            .find(|kind| kind.as_str() == s)
            .ok_or_else(|| format!("unknown provider kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProviderRequest {
    Chat { prompt: String, context: String },
    EmbedText { text: String },
    EmbedImage { image: ImageRef },
    Caption { image: ImageRef, prompt: String },
    Celebrities { image: ImageRef },
    Ocr { image: ImageRef },
    /// The scope itself is enforced by the gateway on the results; engines
    /// are expected to be configured for the same publisher set.
    TextSearch { query: String, scope_digest: String },
    ReverseImageSearch { image: ImageRef, page: usize },
    ExtractContent { url: String },
}

impl ProviderRequest {
    pub fn kind(&self) -> ProviderKind {
        match self {
            ProviderRequest::Chat { .. } => ProviderKind::ChatLlm,
            ProviderRequest::EmbedText { .. } => ProviderKind::TextEmbedder,
            ProviderRequest::EmbedImage { .. } => ProviderKind::ImageEmbedder,
            ProviderRequest::Caption { .. } => ProviderKind::Captioner,
            ProviderRequest::Celebrities { .. } => ProviderKind::CelebrityRecognizer,
            ProviderRequest::Ocr { .. } => ProviderKind::Ocr,
            ProviderRequest::TextSearch { .. } => ProviderKind::TextSearch,
            ProviderRequest::ReverseImageSearch { .. } => ProviderKind::ReverseImageSearch,
            ProviderRequest::ExtractContent { .. } => ProviderKind::ContentExtractor,
        }
    }

    pub fn digest(&self) -> String {
        digest_json(self)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

/// Image bytes shipped inside an extraction response, base64 encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedImage {
    pub uri: String,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedContent {
    pub title: String,
    pub main_text: String,
    #[serde(default)]
    pub main_image: Option<EncodedImage>,
    #[serde(default)]
    pub published_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderResponse {
    Text {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        usage: Option<TokenUsage>,
    },
    Vector { values: Vec<f64> },
    Names { names: Vec<String> },
    Urls { urls: Vec<String> },
    Page(ExtractedContent),
}

impl ProviderResponse {
    pub fn text(text: impl Into<String>) -> Self {
        ProviderResponse::Text {
            text: text.into(),
            usage: None,
        }
    }

    fn variant(&self) -> &'static str {
        match self {
            ProviderResponse::Text { .. } => "text",
            ProviderResponse::Vector { .. } => "vector",
            ProviderResponse::Names { .. } => "names",
            ProviderResponse::Urls { .. } => "urls",
            ProviderResponse::Page(_) => "page",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("provider unavailable: {message}")]
    Unavailable { message: String },
    #[error("request of ~{estimated} tokens exceeds the {limit}-token context limit")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("quota exceeded: {message}")]
    QuotaExceeded { message: String },
    #[error("fetch of {url} failed: {reason}")]
    FetchFailed { url: String, reason: String },
    #[error("no main text found at {url}")]
    ExtractionEmpty { url: String },
    #[error("unreadable image {uri}")]
    UnreadableImage { uri: String },
    #[error("precondition violated: {message}")]
    Precondition { message: String },
    #[error("cassette has no {kind} entry for request {digest}")]
    CassetteMiss { kind: ProviderKind, digest: String },
    #[error("unexpected provider response: {message}")]
    InvalidResponse { message: String },
    #[error("no provider configured for {kind}")]
    NotConfigured { kind: ProviderKind },
}

impl ProviderError {
    pub fn unavailable(message: impl Into<String>) -> Self {
        ProviderError::Unavailable {
            message: message.into(),
        }
    }

    fn precondition(message: impl Into<String>) -> Self {
        ProviderError::Precondition {
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ProviderError::InvalidResponse {
            message: message.into(),
        }
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Unavailable { .. })
    }
}

/// Source of raw image bytes for post ingestion.
#[async_trait]
pub trait ImageSource: Send + Sync {
    async fn fetch(&self, uri: &str) -> Result<Vec<u8>, String>;
}

/// Anything that can answer provider requests: live services, cassettes,
/// mocks.
#[async_trait]
pub trait Backend: Send + Sync {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;

    /// Model identifier serving `kind`, when known.
    fn model_id(&self, _kind: ProviderKind) -> Option<String> {
        None
    }
}

#[async_trait]
impl<B: Backend + ?Sized> Backend for Arc<B> {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).call(request).await
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        (**self).model_id(kind)
    }
}

/// One provider call as seen by diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCallRecord {
    pub kind: ProviderKind,
    pub request_digest: String,
    pub response_digest: String,
    #[serde(skip)]
    pub latency: Duration,
    pub cost: f64,
    pub tokens: TokenUsage,
    pub ok: bool,
    #[serde(default)]
    pub cached: bool,
    #[serde(default)]
    pub speculative: bool,
}

impl ProviderCallRecord {
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.kind, &self.request_digest, &self.response_digest, self.speculative, self.cached).cmp(&(
            other.kind,
            &other.request_digest,
            &other.response_digest,
            other.speculative,
            other.cached,
        ))
    }
}

/// SHA-256 over the canonical JSON encoding of `value`.
pub fn digest_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("provider payloads serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Rough token count used when a provider does not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

struct KindSettings {
    limiter: Arc<Semaphore>,
    cost: CostTable,
    max_context_tokens: Option<usize>,
    model: Option<String>,
}

impl Default for KindSettings {
    fn default() -> Self {
        Self {
            limiter: Arc::new(Semaphore::new(8)),
            cost: CostTable::default(),
            max_context_tokens: None,
            model: None,
        }
    }
}

pub struct GatewayBuilder {
    backend: Arc<dyn Backend>,
    images: Arc<ImageStore>,
    image_source: Arc<dyn ImageSource>,
    settings: BTreeMap<ProviderKind, KindSettings>,
    retry: RetryPolicy,
    call_cache: bool,
}

impl GatewayBuilder {
    pub fn images(mut self, images: Arc<ImageStore>) -> Self {
        self.images = images;
        self
    }

    pub fn image_source(mut self, source: Arc<dyn ImageSource>) -> Self {
        self.image_source = source;
        self
    }

    pub fn in_flight_limit(mut self, kind: ProviderKind, limit: usize) -> Self {
        self.settings.entry(kind).or_default().limiter = Arc::new(Semaphore::new(limit.max(1)));
        self
    }

    pub fn cost(mut self, kind: ProviderKind, cost: CostTable) -> Self {
        self.settings.entry(kind).or_default().cost = cost;
        self
    }

    pub fn context_limit(mut self, kind: ProviderKind, tokens: usize) -> Self {
        self.settings.entry(kind).or_default().max_context_tokens = Some(tokens);
        self
    }

    pub fn model(mut self, kind: ProviderKind, model: impl Into<String>) -> Self {
        self.settings.entry(kind).or_default().model = Some(model.into());
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Serve repeated identical requests from memory.
    pub fn call_cache(mut self, enabled: bool) -> Self {
        self.call_cache = enabled;
        self
    }

    pub fn build(self) -> Arc<Gateway> {
        let mut settings = self.settings;
        for kind in ProviderKind::ALL {
            settings.entry(kind).or_default();
        }
        Arc::new(Gateway {
            backend: self.backend,
            images: self.images,
            image_source: self.image_source,
            settings,
            retry: self.retry,
            cache: self.call_cache.then(|| Mutex::new(HashMap::new())),
            dimensions: Mutex::new(HashMap::new()),
        })
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    images: Arc<ImageStore>,
    image_source: Arc<dyn ImageSource>,
    settings: BTreeMap<ProviderKind, KindSettings>,
    retry: RetryPolicy,
    cache: Option<Mutex<HashMap<(ProviderKind, String), ProviderResponse>>>,
    dimensions: Mutex<HashMap<ProviderKind, usize>>,
}

impl Gateway {
    pub fn builder(backend: impl Backend + 'static) -> GatewayBuilder {
        GatewayBuilder {
            backend: Arc::new(backend),
            images: Arc::new(ImageStore::new()),
            image_source: Arc::new(LocalImageSource),
            settings: BTreeMap::new(),
            retry: RetryPolicy::default(),
            call_cache: false,
        }
    }

    pub fn images(&self) -> &Arc<ImageStore> {
        &self.images
    }

    pub fn image_source(&self) -> &dyn ImageSource {
        self.image_source.as_ref()
    }

    pub fn model_id(&self, kind: ProviderKind) -> Option<String> {
        self.settings
            .get(&kind)
            .and_then(|s| s.model.clone())
            .or_else(|| self.backend.model_id(kind))
    }

    pub fn session(self: &Arc<Self>) -> Session {
        Session {
            gateway: Arc::clone(self),
            ledger: Arc::new(Mutex::new(Vec::new())),
        }
    }

    fn settings(&self, kind: ProviderKind) -> &KindSettings {
        &self.settings[&kind]
    }

    fn check_dimension(&self, kind: ProviderKind, len: usize) -> Result<(), ProviderError> {
        if len == 0 {
            return Err(ProviderError::invalid(format!("{kind} returned an empty vector")));
        }
        let mut dims = self.dimensions.lock().expect("dimension table poisoned");
        let expected = *dims.entry(kind).or_insert(len);
        if expected != len {
            return Err(ProviderError::invalid(format!(
                "{kind} returned {len} dimensions, expected {expected}"
            )));
        }
        Ok(())
    }
}

/// Page content as returned to the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PageContent {
    pub url: Url,
    pub title: String,
    pub main_text: String,
    pub main_image: Option<ImageRef>,
    pub published_at: Option<DateTime<Utc>>,
}

/// Call ledger for one unit of work. Cloning shares the ledger.
#[derive(Clone)]
pub struct Session {
    gateway: Arc<Gateway>,
    ledger: Arc<Mutex<Vec<ProviderCallRecord>>>,
}

impl Session {
    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// A session with its own ledger on the same gateway.
    pub fn child(&self) -> Session {
        self.gateway.session()
    }

    /// Moves the records of `child` into this ledger.
    pub fn absorb(&self, child: &Session, speculative: bool) {
        let mut records = std::mem::take(&mut *child.ledger.lock().expect("ledger poisoned"));
        if speculative {
            for record in &mut records {
                record.speculative = true;
            }
        }
        self.ledger.lock().expect("ledger poisoned").extend(records);
    }

    pub fn calls(&self) -> Vec<ProviderCallRecord> {
        self.ledger.lock().expect("ledger poisoned").clone()
    }

    fn record(&self, record: ProviderCallRecord) {
        self.ledger.lock().expect("ledger poisoned").push(record);
    }

    /// Sends one request through retry, limits and accounting.
    pub async fn call(&self, request: ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let kind = request.kind();
        let request_digest = request.digest();
        let gateway = &self.gateway;
        let settings = gateway.settings(kind);

        if let Some(cache) = &gateway.cache {
            let hit = cache
                .lock()
                .expect("call cache poisoned")
                .get(&(kind, request_digest.clone()))
                .cloned();
            if let Some(response) = hit {
                self.record(ProviderCallRecord {
                    kind,
                    response_digest: digest_json(&response),
                    request_digest,
                    latency: Duration::ZERO,
                    cost: 0.0,
                    tokens: TokenUsage::default(),
                    ok: true,
                    cached: true,
                    speculative: false,
                });
                return Ok(response);
            }
        }

        let _permit = settings
            .limiter
            .acquire()
            .await
            .map_err(|_| ProviderError::unavailable("gateway shut down"))?;
        let started = Instant::now();
        let mut attempt = 0;
        let outcome = loop {
            match gateway.backend.call(&request).await {
                Err(err) if err.is_transient() && attempt + 1 < gateway.retry.attempts => {
                    tracing::debug!(%kind, attempt, error = %err, "retrying provider call");
                    tokio::time::sleep(gateway.retry.delay(attempt)).await;
                    attempt += 1;
                }
                other => break other,
            }
        };
        let latency = started.elapsed();

        let record = match &outcome {
            Ok(response) => {
                let tokens = token_usage(&request, response);
                ProviderCallRecord {
                    kind,
                    request_digest: request_digest.clone(),
                    response_digest: digest_json(response),
                    latency,
                    cost: settings.cost.price(tokens),
                    tokens,
                    ok: true,
                    cached: false,
                    speculative: false,
                }
            }
            Err(err) => ProviderCallRecord {
                kind,
                request_digest: request_digest.clone(),
                response_digest: digest_json(err),
                latency,
                cost: 0.0,
                tokens: TokenUsage::default(),
                ok: false,
                cached: false,
                speculative: false,
            },
        };
        self.record(record);

        if let (Some(cache), Ok(response)) = (&gateway.cache, &outcome) {
            cache
                .lock()
                .expect("call cache poisoned")
                .insert((kind, request_digest), response.clone());
        }
        outcome
    }

    pub async fn chat(&self, prompt: &str, context: &str) -> Result<String, ProviderError> {
        if prompt.trim().is_empty() {
            return Err(ProviderError::precondition("chat prompt is empty"));
        }
        if let Some(limit) = self.gateway.settings(ProviderKind::ChatLlm).max_context_tokens {
            let estimated = (estimate_tokens(prompt) + estimate_tokens(context)) as usize;
            if estimated > limit {
                return Err(ProviderError::ContextOverflow { estimated, limit });
            }
        }
        let request = ProviderRequest::Chat {
            prompt: prompt.to_string(),
            context: context.to_string(),
        };
        match self.call(request).await? {
            ProviderResponse::Text { text, .. } => Ok(text),
            other => Err(ProviderError::invalid(format!("chat returned {}", other.variant()))),
        }
    }

    pub async fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::precondition("cannot embed empty text"));
        }
        let request = ProviderRequest::EmbedText {
            text: text.to_string(),
        };
        self.vector(ProviderKind::TextEmbedder, request).await
    }

    pub async fn embed_image(&self, image: &ImageRef) -> Result<Vec<f64>, ProviderError> {
        self.require_image(image)?;
        let request = ProviderRequest::EmbedImage {
            image: image.clone(),
        };
        self.vector(ProviderKind::ImageEmbedder, request).await
    }

    async fn vector(&self, kind: ProviderKind, request: ProviderRequest) -> Result<Vec<f64>, ProviderError> {
        match self.call(request).await? {
            ProviderResponse::Vector { values } => {
                self.gateway.check_dimension(kind, values.len())?;
                Ok(values)
            }
            other => Err(ProviderError::invalid(format!("{kind} returned {}", other.variant()))),
        }
    }

    fn require_image(&self, image: &ImageRef) -> Result<(), ProviderError> {
        if self.gateway.images.contains(image) {
            Ok(())
        } else {
            Err(ProviderError::UnreadableImage {
                uri: image.uri.clone(),
            })
        }
    }

    pub async fn caption(&self, image: &ImageRef) -> Result<String, ProviderError> {
        self.require_image(image)?;
        let request = ProviderRequest::Caption {
            image: image.clone(),
            prompt: CAPTION_PROMPT.to_string(),
        };
        match self.call(request).await? {
            ProviderResponse::Text { text, .. } => Ok(text.trim().to_string()),
            other => Err(ProviderError::invalid(format!("captioner returned {}", other.variant()))),
        }
    }

    pub async fn recognize_celebrities(&self, image: &ImageRef) -> Result<Vec<String>, ProviderError> {
        self.require_image(image)?;
        let request = ProviderRequest::Celebrities {
            image: image.clone(),
        };
        match self.call(request).await? {
            ProviderResponse::Names { names } => Ok(names),
            other => Err(ProviderError::invalid(format!(
                "celebrity recognizer returned {}",
                other.variant()
            ))),
        }
    }

    pub async fn ocr(&self, image: &ImageRef) -> Result<String, ProviderError> {
        self.require_image(image)?;
        let request = ProviderRequest::Ocr {
            image: image.clone(),
        };
        match self.call(request).await? {
            ProviderResponse::Text { text, .. } => Ok(text),
            other => Err(ProviderError::invalid(format!("ocr returned {}", other.variant()))),
        }
    }

    /// Text web search. Hits outside `scope` are dropped; provider order is
    /// otherwise preserved.
    pub async fn search_text(&self, query: &Query, scope: &Scope) -> Result<Vec<Url>, ProviderError> {
        if scope.is_empty() {
            return Err(ProviderError::precondition("search scope is empty"));
        }
        let request = ProviderRequest::TextSearch {
            query: query.text.clone(),
            scope_digest: scope.digest().to_string(),
        };
        let urls = match self.call(request).await? {
            ProviderResponse::Urls { urls } => urls,
            other => return Err(ProviderError::invalid(format!("text search returned {}", other.variant()))),
        };
        Ok(parse_urls(urls)
            .into_iter()
            .filter(|url| scope.contains_url(url))
            .collect())
    }

    /// Reverse image search, paging until `max_pages` or an empty page.
    /// Results are not scope-filtered: the engine cannot restrict sites.
    pub async fn search_reverse_image(&self, image: &ImageRef, max_pages: usize) -> Result<Vec<Url>, ProviderError> {
        if max_pages == 0 {
            return Err(ProviderError::precondition("max_pages must be at least 1"));
        }
        self.require_image(image)?;
        let mut out = Vec::new();
        for page in 0..max_pages {
            let request = ProviderRequest::ReverseImageSearch {
                image: image.clone(),
                page,
            };
            let urls = match self.call(request).await? {
                ProviderResponse::Urls { urls } => urls,
                other => {
                    return Err(ProviderError::invalid(format!(
                        "reverse image search returned {}",
                        other.variant()
                    )))
                }
            };
            if urls.is_empty() {
                break;
            }
            out.extend(parse_urls(urls.into_iter().take(REVERSE_IMAGE_PAGE_SIZE).collect()));
        }
        Ok(out)
    }

    pub async fn extract_content(&self, url: &Url) -> Result<PageContent, ProviderError> {
        let request = ProviderRequest::ExtractContent {
            url: url.to_string(),
        };
        let content = match self.call(request).await? {
            ProviderResponse::Page(content) => content,
            other => {
                return Err(ProviderError::invalid(format!(
                    "content extractor returned {}",
                    other.variant()
                )))
            }
        };
        if content.main_text.trim().is_empty() {
            return Err(ProviderError::ExtractionEmpty { url: url.to_string() });
        }
        let main_image = content.main_image.and_then(|encoded| {
            use base64::Engine;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(encoded.data.as_bytes())
                .ok()?;
            self.gateway.images.insert(&encoded.uri, bytes).ok()
        });
        Ok(PageContent {
            url: url.clone(),
            title: content.title,
            main_text: content.main_text,
            main_image,
            published_at: content.published_at,
        })
    }
}

fn parse_urls(urls: Vec<String>) -> Vec<Url> {
    urls.into_iter()
        .filter_map(|raw| match Url::parse(&raw) {
            Ok(url) if matches!(url.scheme(), "http" | "https") => Some(url),
            _ => {
                tracing::debug!(url = %raw, "dropping unparsable search hit");
                None
            }
        })
        .collect()
}

fn token_usage(request: &ProviderRequest, response: &ProviderResponse) -> TokenUsage {
    match (request, response) {
        (_, ProviderResponse::Text { usage: Some(usage), .. }) => *usage,
        (ProviderRequest::Chat { prompt, context }, ProviderResponse::Text { text, .. }) => TokenUsage {
            input: estimate_tokens(prompt) + estimate_tokens(context),
            output: estimate_tokens(text),
        },
        (ProviderRequest::EmbedText { text }, _) => TokenUsage {
            input: estimate_tokens(text),
            output: 0,
        },
        _ => TokenUsage::default(),
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        if self.base_delay_ms == 0 {
            return Duration::ZERO;
        }
        let base = self.base_delay_ms.saturating_mul(1 << attempt.min(16));
        let jitter = rand::thread_rng().gen_range(0..self.base_delay_ms);
        Duration::from_millis(base + jitter)
    }
}
