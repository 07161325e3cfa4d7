//! A scripted, deterministic stand-in for every external provider.
//!
//! Each scenario owns a unique keyword, a topic axis in embedding space and
//! a set of pages. Embeddings are built so that the dot product of a post
//! and a page equals the page's scripted text relevance, and the cosine of
//! two images equals the scripted visual relevance.

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;
use base64::Engine;
use chrono::{DateTime, Utc};
use veracity_core::gateway::{
    tiny_png, Backend, EncodedImage, ExtractedContent, ImageSource, ProviderError, ProviderKind, ProviderRequest,
    ProviderResponse,
};
use veracity_core::images::sha256_hex;
use veracity_core::prompts::{parse_fusion_slots, EXTRACTION_PROMPT, RESPONSE_PROMPT};
use veracity_core::text::strip_urls_and_emoji;

/// Width of every synthetic embedding.
pub const DIMENSIONS: usize = 128;
const TOPIC_AXES: usize = 32;

pub const TEXT_EMBEDDER_MODEL: &str = "msmarco-distilbert-base-tas-b";
pub const IMAGE_EMBEDDER_MODEL: &str = "facebook/dino-vitb8";

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSpec {
    pub seed: u8,
    pub caption: String,
    pub celebrities: Vec<String>,
    pub ocr: String,
}

impl ImageSpec {
    pub fn photo(seed: u8, caption: &str) -> Self {
        Self {
            seed,
            caption: caption.into(),
            celebrities: Vec::new(),
            ocr: String::new(),
        }
    }

    pub fn bytes(&self) -> Vec<u8> {
        tiny_png(self.seed)
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageSpec {
    pub url: String,
    pub title: String,
    /// Sentences the extraction model reports as explicit refutations.
    pub explicit: Vec<String>,
    /// Sentences reported as implicit refutations (context).
    pub implicit: Vec<String>,
    /// Neutral text appended after the quoted sentences.
    pub filler: String,
    pub published_at: Option<DateTime<Utc>>,
    /// Dot product with the post's text embedding.
    pub relevance: f64,
    /// Main image seed and its cosine with the post's first image.
    pub image: Option<(u8, f64)>,
    /// A quote the model returns that is not in the page.
    pub hallucination: Option<String>,
    pub found_by_reverse_image: bool,
    pub fetch_fails: bool,
}

impl PageSpec {
    pub fn new(url: &str, relevance: f64, published_at: Option<DateTime<Utc>>) -> Self {
        Self {
            url: url.into(),
            title: format!("Report {url}"),
            explicit: Vec::new(),
            implicit: Vec::new(),
            filler: "Officials did not respond to further questions.".into(),
            published_at,
            relevance,
            image: None,
            hallucination: None,
            found_by_reverse_image: false,
            fetch_fails: false,
        }
    }

    pub fn explicit(mut self, sentence: &str) -> Self {
        self.explicit.push(sentence.into());
        self
    }

    pub fn implicit(mut self, sentence: &str) -> Self {
        self.implicit.push(sentence.into());
        self
    }

    pub fn filler(mut self, text: impl Into<String>) -> Self {
        self.filler = text.into();
        self
    }

    pub fn image(mut self, seed: u8, visual: f64) -> Self {
        self.image = Some((seed, visual));
        self
    }

    pub fn hallucinate(mut self, quote: &str) -> Self {
        self.hallucination = Some(quote.into());
        self
    }

    pub fn reverse_image_only(mut self) -> Self {
        self.found_by_reverse_image = true;
        self
    }

    pub fn failing(mut self) -> Self {
        self.fetch_fails = true;
        self
    }

    pub fn main_text(&self) -> String {
        let mut parts: Vec<&str> = self.explicit.iter().chain(&self.implicit).map(String::as_str).collect();
        parts.push(&self.filler);
        parts.join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseStyle {
    Compliant,
    /// Numbers its URLs on the first attempt only.
    NumberedOnce,
    /// Numbers its URLs on every attempt.
    AlwaysNumbered,
    /// Cites one URL that is not among the facts.
    ExtraUrl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Appears in the post text or in its first image's caption.
    pub keyword: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub author_name: String,
    pub author_screen_name: String,
    pub author_description: String,
    pub images: Vec<ImageSpec>,
    pub pages: Vec<PageSpec>,
    /// Extra text-search hits on publishers outside the search scope.
    pub out_of_scope_hits: Vec<String>,
    pub queries_none: bool,
    pub response: ResponseStyle,
}

impl Scenario {
    pub fn image_uri(&self, index: usize) -> String {
        format!("fixture://{}/{index}.png", self.name)
    }

    /// The post in the ingestion JSON format.
    pub fn raw_post_json(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.name,
            "text": self.text,
            "created_at": self.created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "author": {
                "name": self.author_name,
                "screen_name": self.author_screen_name,
                "description": self.author_description,
            },
            "images": (0..self.images.len()).map(|i| serde_json::json!({"uri": self.image_uri(i)})).collect::<Vec<_>>(),
        })
    }
}

/// The description the scripted fusion model writes for these slots.
pub fn fused_description(caption: &str, names: &[String], ocr: &str) -> String {
    let mut out = if !ocr.is_empty() && !names.is_empty() {
        format!("A quote from {}: \"{}\"", names.join(", "), ocr)
    } else if !names.is_empty() {
        format!("A photo of {} with {}", caption, names.join(", "))
    } else {
        format!("A photo of {caption}")
    };
    if !ocr.is_empty() && names.is_empty() {
        out.push_str(&format!(" with the text \"{ocr}\""));
    }
    out
}

fn unit(axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; DIMENSIONS];
    v[axis] = 1.0;
    v
}

fn orthogonal_axis(index: usize) -> usize {
    TOPIC_AXES + index % (DIMENSIONS - TOPIC_AXES)
}

/// Norm-`scale` vector with cosine `cos` to topic axis `topic`.
fn blend(topic: usize, cos: f64, other: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; DIMENSIONS];
    v[topic] = cos * scale;
    v[other] = (1.0 - cos * cos).max(0.0).sqrt() * scale;
    v
}

/// Bag-of-words fallback for text the world did not script.
fn hashed_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; DIMENSIONS];
    for word in text.split_whitespace() {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in word.to_lowercase().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        v[TOPIC_AXES + (h as usize) % (DIMENSIONS - TOPIC_AXES)] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[DIMENSIONS - 1] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Default)]
struct Tables {
    text_vectors: HashMap<String, Vec<f64>>,
    image_vectors: HashMap<String, Vec<f64>>,
    images: HashMap<String, ImageSpec>,
    image_scenario: HashMap<String, usize>,
    pages: HashMap<String, (usize, PageSpec)>,
}

/// Provider backend serving a set of scenarios.
#[derive(Clone)]
pub struct SyntheticBackend {
    scenarios: Arc<Vec<Scenario>>,
    tables: Arc<Tables>,
}

impl SyntheticBackend {
    pub fn new(scenarios: Vec<Scenario>) -> Self {
        let mut t = Tables::default();
        let mut page_index = 0;
        for (topic, s) in scenarios.iter().enumerate() {
            assert!(topic < TOPIC_AXES, "too many scenarios for the embedding space");
            let post_text = strip_urls_and_emoji(&s.text);
            let descriptions: Vec<String> = s
                .images
                .iter()
                .map(|img| fused_description(&img.caption, &img.celebrities, &img.ocr))
                .collect();
            let relevance_text = if post_text.is_empty() { descriptions.join(" ") } else { post_text };
            let mut post_vec = unit(topic);
            post_vec.iter_mut().for_each(|x| *x *= 10.0);
            t.text_vectors.insert(relevance_text, post_vec);
            for img in &s.images {
                t.image_vectors.insert(img.sha256(), unit(topic));
                t.image_scenario.insert(img.sha256(), topic);
                t.images.insert(img.sha256(), img.clone());
            }
            for page in &s.pages {
                let other = orthogonal_axis(page_index);
                page_index += 1;
                t.text_vectors
                    .insert(page.main_text(), blend(topic, page.relevance / 100.0, other, 10.0));
                if let Some((seed, visual)) = page.image {
                    t.image_vectors
                        .insert(sha256_hex(&tiny_png(seed)), blend(topic, visual, other, 1.0));
                }
                t.pages.insert(page.url.clone(), (topic, page.clone()));
            }
        }
        Self {
            scenarios: Arc::new(scenarios),
            tables: Arc::new(t),
        }
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    fn scenario_in(&self, text: &str) -> Option<&Scenario> {
        let text = text.to_lowercase();
        self.scenarios.iter().find(|s| text.contains(&s.keyword))
    }

    fn chat(&self, prompt: &str, context: &str) -> String {
        if prompt.starts_with("Given a tweet, you are required to generate") {
            return self.queries(prompt, context);
        }
        if let Some((caption, names, ocr)) = parse_fusion_slots(prompt) {
            return format!("{{{}}}", fused_description(&caption, &names, &ocr));
        }
        if prompt == EXTRACTION_PROMPT {
            return self.extraction(context);
        }
        if prompt == RESPONSE_PROMPT {
            return self.response(context);
        }
        "none".into()
    }

    fn queries(&self, prompt: &str, context: &str) -> String {
        let n: usize = prompt
            .split_whitespace()
            .nth(8)
            .and_then(|w| w.parse().ok())
            .unwrap_or(3);
        let Some(s) = self.scenario_in(context) else {
            return "none".into();
        };
        if s.queries_none {
            return "none".into();
        }
        let suffixes = ["", " fact check", " claim origin", " official statement", " news coverage"];
        suffixes
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, suffix)| format!("{}. {}{}", i + 1, s.keyword, suffix))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn extraction(&self, context: &str) -> String {
        let article = context
            .split_once("Article content: ")
            .map(|(_, rest)| rest.split("\n\nTweet: ").next().unwrap_or(rest))
            .unwrap_or("");
        let page = self
            .tables
            .pages
            .values()
            .map(|(_, p)| p)
            .find(|p| !article.is_empty() && p.main_text().starts_with(article.trim_end()));
        let Some(page) = page else {
            return "none".into();
        };
        let visible = |q: &&String| article.contains(q.as_str());
        let mut explicit: Vec<String> = page.explicit.iter().filter(visible).map(|q| format!("\"{q}\"")).collect();
        if let Some(h) = &page.hallucination {
            explicit.push(format!("\"{h}\""));
        }
        let implicit: Vec<String> = page.implicit.iter().filter(visible).map(|q| format!("\"{q}\"")).collect();
        if explicit.is_empty() && implicit.is_empty() {
            return "none.".into();
        }
        let section = |items: Vec<String>| if items.is_empty() { "none".to_string() } else { items.join("\n") };
        format!("1. {}\n2. {}", section(explicit), section(implicit))
    }

    fn response(&self, context: &str) -> String {
        let mut urls: Vec<&str> = Vec::new();
        let mut first_quote = None;
        for line in context.lines().filter(|l| l.starts_with("- \"")) {
            if let Some((quote, rest)) = line[3..].split_once("\" Source: ") {
                first_quote.get_or_insert(quote);
                if let Some(url) = rest.split_whitespace().next() {
                    if !urls.contains(&url) {
                        urls.push(url);
                    }
                }
            }
        }
        let style = self.scenario_in(context).map_or(ResponseStyle::Compliant, |s| s.response);
        let retry = context.contains("previous reply did not follow");
        let summary = first_quote.unwrap_or("The available reports disagree with it.");
        let numbered = match style {
            ResponseStyle::AlwaysNumbered => true,
            ResponseStyle::NumberedOnce => !retry,
            _ => false,
        };
        if numbered {
            let list: Vec<String> = urls.iter().enumerate().map(|(i, u)| format!("{}. {u}", i + 1)).collect();
            return format!("This tweet is misleading. {summary}\nSources:\n{}", list.join("\n"));
        }
        let mut cited = urls.join(" and ");
        if style == ResponseStyle::ExtraUrl {
            cited.push_str(" and https://unlisted-source.example/story");
        }
        format!("This tweet is misleading. {summary} See {cited} for details.")
    }

    fn page(&self, url: &str) -> Result<ExtractedContent, ProviderError> {
        let Some((_, page)) = self.tables.pages.get(url) else {
            return Err(ProviderError::FetchFailed {
                url: url.into(),
                reason: "404 Not Found".into(),
            });
        };
        if page.fetch_fails {
            return Err(ProviderError::FetchFailed {
                url: url.into(),
                reason: "403 Forbidden".into(),
            });
        }
        Ok(ExtractedContent {
            title: page.title.clone(),
            main_text: page.main_text(),
            main_image: page.image.map(|(seed, _)| EncodedImage {
                uri: format!("{url}#image"),
                data: base64::engine::general_purpose::STANDARD.encode(tiny_png(seed)),
            }),
            published_at: page.published_at,
        })
    }
}

#[async_trait]
impl Backend for SyntheticBackend {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let t = &self.tables;
        match request {
            ProviderRequest::Chat { prompt, context } => Ok(ProviderResponse::text(self.chat(prompt, context))),
            ProviderRequest::EmbedText { text } => Ok(ProviderResponse::Vector {
                values: t.text_vectors.get(text).cloned().unwrap_or_else(|| hashed_embedding(text)),
            }),
            ProviderRequest::EmbedImage { image } => Ok(ProviderResponse::Vector {
                values: t
                    .image_vectors
                    .get(&image.sha256)
                    .cloned()
                    .unwrap_or_else(|| unit(DIMENSIONS - 1)),
            }),
            ProviderRequest::Caption { image, .. } => Ok(ProviderResponse::text(
                t.images.get(&image.sha256).map(|i| i.caption.clone()).unwrap_or_default(),
            )),
            ProviderRequest::Celebrities { image } => Ok(ProviderResponse::Names {
                names: t.images.get(&image.sha256).map(|i| i.celebrities.clone()).unwrap_or_default(),
            }),
            ProviderRequest::Ocr { image } => Ok(ProviderResponse::text(
                t.images.get(&image.sha256).map(|i| i.ocr.clone()).unwrap_or_default(),
            )),
            ProviderRequest::TextSearch { query, .. } => {
                let urls = match self.scenario_in(query) {
                    Some(s) => s
                        .pages
                        .iter()
                        .filter(|p| !p.found_by_reverse_image)
                        .map(|p| p.url.clone())
                        .chain(s.out_of_scope_hits.iter().cloned())
                        .collect(),
                    None => Vec::new(),
                };
                Ok(ProviderResponse::Urls { urls })
            }
            ProviderRequest::ReverseImageSearch { image, page } => {
                let urls: Vec<String> = match t.image_scenario.get(&image.sha256) {
                    Some(&topic) => self.scenarios[topic]
                        .pages
                        .iter()
                        .filter(|p| p.found_by_reverse_image)
                        .map(|p| p.url.clone())
                        .collect(),
                    None => Vec::new(),
                };
                let start = page * 10;
                Ok(ProviderResponse::Urls {
                    urls: urls.into_iter().skip(start).take(10).collect(),
                })
            }
            ProviderRequest::ExtractContent { url } => self.page(url).map(ProviderResponse::Page),
        }
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        match kind {
            ProviderKind::TextEmbedder => Some(TEXT_EMBEDDER_MODEL.into()),
            ProviderKind::ImageEmbedder => Some(IMAGE_EMBEDDER_MODEL.into()),
            ProviderKind::ChatLlm => Some("synthetic-chat".into()),
            _ => None,
        }
    }
}

/// Serves scenario images from memory by their `fixture://` URIs.
#[derive(Debug, Clone, Default)]
pub struct MemoryImageSource {
    images: HashMap<String, Vec<u8>>,
}

impl MemoryImageSource {
    pub fn new(scenarios: &[Scenario]) -> Self {
        let mut images = HashMap::new();
        for s in scenarios {
            for (i, img) in s.images.iter().enumerate() {
                images.insert(s.image_uri(i), img.bytes());
            }
        }
        Self { images }
    }

    pub fn insert(&mut self, uri: impl Into<String>, bytes: Vec<u8>) {
        self.images.insert(uri.into(), bytes);
    }
}

#[async_trait]
impl ImageSource for MemoryImageSource {
    async fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        self.images.get(uri).cloned().ok_or_else(|| format!("no fixture image at {uri}"))
    }
}
