//! Scriptable in-process backend for tests and examples.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use async_trait::async_trait;

use super::{Backend, ExtractedContent, ProviderError, ProviderKind, ProviderRequest, ProviderResponse};

type Handler = Arc<dyn Fn(&ProviderRequest) -> Result<ProviderResponse, ProviderError> + Send + Sync>;

/// A backend assembled from per-kind closures. Unhandled kinds answer
/// `NotConfigured`.
#[derive(Clone, Default)]
pub struct MockBackend {
    handlers: HashMap<ProviderKind, Handler>,
    models: BTreeMap<ProviderKind, String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(
        mut self,
        kind: ProviderKind,
        handler: impl Fn(&ProviderRequest) -> Result<ProviderResponse, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        self.handlers.insert(kind, Arc::new(handler));
        self
    }

    pub fn model(mut self, kind: ProviderKind, model: impl Into<String>) -> Self {
        self.models.insert(kind, model.into());
        self
    }

    /// Chat handler receiving `(prompt, context)`. `None` answers "none".
    pub fn chat(self, f: impl Fn(&str, &str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::ChatLlm, move |req| match req {
            ProviderRequest::Chat { prompt, context } => Ok(ProviderResponse::text(
                f(prompt, context).unwrap_or_else(|| "none".into()),
            )),
            other => Err(unexpected(other)),
        })
    }

    pub fn fail_chat(self, f: impl Fn() -> ProviderError + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::ChatLlm, move |_| Err(f()))
    }

    /// Text embedder mapping exact strings to fixed vectors; unknown text
    /// maps to the zero vector of the same width.
    pub fn text_vectors(self, table: HashMap<String, Vec<f64>>) -> Self {
        let width = table.values().map(Vec::len).max().unwrap_or(1);
        self.on(ProviderKind::TextEmbedder, move |req| match req {
            ProviderRequest::EmbedText { text } => Ok(ProviderResponse::Vector {
                values: table.get(text).cloned().unwrap_or_else(|| vec![0.0; width]),
            }),
            other => Err(unexpected(other)),
        })
    }

    /// Embeds `vocab[i]` as the i-th unit basis vector.
    pub fn basis_embedder(self, vocab: &[&str]) -> Self {
        let n = vocab.len();
        let table = vocab
            .iter()
            .enumerate()
            .map(|(i, word)| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                (word.to_string(), v)
            })
            .collect();
        self.text_vectors(table)
    }

    /// Image embedder keyed by content digest.
    pub fn image_vectors(self, table: HashMap<String, Vec<f64>>) -> Self {
        let width = table.values().map(Vec::len).max().unwrap_or(1);
        self.on(ProviderKind::ImageEmbedder, move |req| match req {
            ProviderRequest::EmbedImage { image } => Ok(ProviderResponse::Vector {
                values: table.get(&image.sha256).cloned().unwrap_or_else(|| vec![0.0; width]),
            }),
            other => Err(unexpected(other)),
        })
    }

    pub fn text_search(self, f: impl Fn(&str) -> Vec<String> + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::TextSearch, move |req| match req {
            ProviderRequest::TextSearch { query, .. } => Ok(ProviderResponse::Urls { urls: f(query) }),
            other => Err(unexpected(other)),
        })
    }

    /// Reverse image engine with `pages` pages of `per_page` hits each.
    /// Hit `r` on page `p` is `https://site{r}.example/p{p}/r{r}`.
    pub fn reverse_image_pages(self, pages: usize, per_page: usize) -> Self {
        self.on(ProviderKind::ReverseImageSearch, move |req| match req {
            ProviderRequest::ReverseImageSearch { page, .. } => {
                let urls = if *page < pages {
                    (0..per_page)
                        .map(|r| format!("https://site{r}.example/p{page}/r{r}"))
                        .collect()
                } else {
                    Vec::new()
                };
                Ok(ProviderResponse::Urls { urls })
            }
            other => Err(unexpected(other)),
        })
    }

    pub fn reverse_image(self, f: impl Fn(usize) -> Vec<String> + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::ReverseImageSearch, move |req| match req {
            ProviderRequest::ReverseImageSearch { page, .. } => Ok(ProviderResponse::Urls { urls: f(*page) }),
            other => Err(unexpected(other)),
        })
    }

    /// Content extractor serving fixed pages; unknown URLs fail to fetch.
    pub fn pages(self, pages: HashMap<String, ExtractedContent>) -> Self {
        self.on(ProviderKind::ContentExtractor, move |req| match req {
            ProviderRequest::ExtractContent { url } => pages
                .get(url)
                .cloned()
                .map(ProviderResponse::Page)
                .ok_or_else(|| ProviderError::FetchFailed {
                    url: url.clone(),
                    reason: "404 Not Found".into(),
                }),
            other => Err(unexpected(other)),
        })
    }

    pub fn captioner(self, f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::Captioner, move |req| match req {
            ProviderRequest::Caption { image, .. } => Ok(ProviderResponse::text(f(&image.sha256))),
            other => Err(unexpected(other)),
        })
    }

    pub fn celebrities(self, f: impl Fn(&str) -> Vec<String> + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::CelebrityRecognizer, move |req| match req {
            ProviderRequest::Celebrities { image } => Ok(ProviderResponse::Names { names: f(&image.sha256) }),
            other => Err(unexpected(other)),
        })
    }

    pub fn ocr(self, f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        self.on(ProviderKind::Ocr, move |req| match req {
            ProviderRequest::Ocr { image } => Ok(ProviderResponse::text(f(&image.sha256))),
            other => Err(unexpected(other)),
        })
    }
}

fn unexpected(request: &ProviderRequest) -> ProviderError {
    ProviderError::InvalidResponse {
        message: format!("mock handler got {:?}", request.kind()),
    }
}

#[async_trait]
impl Backend for MockBackend {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let kind = request.kind();
        match self.handlers.get(&kind) {
            Some(handler) => handler(request),
            None => Err(ProviderError::NotConfigured { kind }),
        }
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        self.models.get(&kind).cloned()
    }
}

/// A small PNG whose pixels depend on `seed`, for fixtures.
pub fn tiny_png(seed: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(4, 4, |x, y| image::Rgb([seed, (x * 40) as u8, (y * 40) as u8]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encode");
    out.into_inner()
}
