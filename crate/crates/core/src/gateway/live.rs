//! HTTP-backed providers and routing.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, ImageSource, ProviderError, ProviderKind, ProviderRequest, ProviderResponse, TokenUsage};
use crate::images::ImageStore;

fn client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .user_agent(concat!("veracity/", env!("CARGO_PKG_VERSION")))
        .build()
        .expect("reqwest client builds with static settings")
}

/// Maps an HTTP status to the provider error taxonomy.
fn status_error(status: reqwest::StatusCode, body: &str) -> ProviderError {
    let message = format!("HTTP {status}: {}", body.chars().take(300).collect::<String>());
    if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        ProviderError::QuotaExceeded { message }
    } else if status.is_server_error() {
        ProviderError::Unavailable { message }
    } else {
        ProviderError::InvalidResponse { message }
    }
}

async fn post_json(
    client: &reqwest::Client,
    url: &str,
    credential: Option<&str>,
    body: &Value,
) -> Result<Value, ProviderError> {
    let mut request = client.post(url).json(body);
    if let Some(key) = credential {
        request = request.bearer_auth(key);
    }
    let response = request
        .send()
        .await
        .map_err(|e| ProviderError::unavailable(e.to_string()))?;
    let status = response.status();
    let text = response
        .text()
        .await
        .map_err(|e| ProviderError::unavailable(e.to_string()))?;
    if !status.is_success() {
        return Err(status_error(status, &text));
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::invalid(format!("malformed JSON: {e}")))
}

fn join(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path)
}

/// OpenAI-compatible chat completions, temperature 0.
pub struct OpenAiChat {
    client: reqwest::Client,
    endpoint: String,
    credential: Option<String>,
    model: String,
}

impl OpenAiChat {
    pub fn new(endpoint: String, credential: Option<String>, model: String, timeout: Duration) -> Self {
        Self {
            client: client(timeout),
            endpoint,
            credential,
            model,
        }
    }
}

#[async_trait]
impl Backend for OpenAiChat {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let ProviderRequest::Chat { prompt, context } = request else {
            return Err(ProviderError::NotConfigured { kind: request.kind() });
        };
        let content = if context.is_empty() {
            prompt.clone()
        } else {
            format!("{prompt}\n\n{context}")
        };
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        });
        let reply = post_json(
            &self.client,
            &join(&self.endpoint, "chat/completions"),
            self.credential.as_deref(),
            &body,
        )
        .await?;
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::invalid("missing choices[0].message.content"))?
            .to_string();
        let usage = reply.get("usage").map(|u| TokenUsage {
            input: u["prompt_tokens"].as_u64().unwrap_or(0),
            output: u["completion_tokens"].as_u64().unwrap_or(0),
        });
        Ok(ProviderResponse::Text { text, usage })
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        (kind == ProviderKind::ChatLlm).then(|| self.model.clone())
    }
}

/// OpenAI-compatible embeddings endpoint.
pub struct OpenAiEmbeddings {
    client: reqwest::Client,
    endpoint: String,
    credential: Option<String>,
    model: String,
}

impl OpenAiEmbeddings {
    pub fn new(endpoint: String, credential: Option<String>, model: String, timeout: Duration) -> Self {
        Self {
            client: client(timeout),
            endpoint,
            credential,
            model,
        }
    }
}

#[async_trait]
impl Backend for OpenAiEmbeddings {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let ProviderRequest::EmbedText { text } = request else {
            return Err(ProviderError::NotConfigured { kind: request.kind() });
        };
        let body = json!({"model": self.model, "input": text});
        let reply = post_json(
            &self.client,
            &join(&self.endpoint, "embeddings"),
            self.credential.as_deref(),
            &body,
        )
        .await?;
        let values = reply["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::invalid("missing data[0].embedding"))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| ProviderError::invalid("non-numeric embedding")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProviderResponse::Vector { values })
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        (kind == ProviderKind::TextEmbedder).then(|| self.model.clone())
    }
}

/// Generic adapter: POSTs `{"request": ..., "image_base64": ...}` and expects
/// a provider response as JSON. Suits self-hosted captioners, OCR, search
/// proxies and the like.
pub struct JsonAdapter {
    client: reqwest::Client,
    endpoint: String,
    credential: Option<String>,
    model: Option<String>,
    images: Arc<ImageStore>,
}

impl JsonAdapter {
    pub fn new(
        endpoint: String,
        credential: Option<String>,
        model: Option<String>,
        images: Arc<ImageStore>,
        timeout: Duration,
    ) -> Self {
        Self {
            client: client(timeout),
            endpoint,
            credential,
            model,
            images,
        }
    }
}

#[async_trait]
impl Backend for JsonAdapter {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let image = match request {
            ProviderRequest::EmbedImage { image }
            | ProviderRequest::Caption { image, .. }
            | ProviderRequest::Celebrities { image }
            | ProviderRequest::Ocr { image }
            | ProviderRequest::ReverseImageSearch { image, .. } => Some(image),
            _ => None,
        };
        let image_base64 = match image {
            Some(image) => {
                let bytes = self
                    .images
                    .get(image)
                    .map_err(|_| ProviderError::UnreadableImage { uri: image.uri.clone() })?;
                Some(base64::engine::general_purpose::STANDARD.encode(&*bytes))
            }
            None => None,
        };
        let body = json!({"request": request, "model": self.model, "image_base64": image_base64});
        let reply = post_json(&self.client, &self.endpoint, self.credential.as_deref(), &body).await?;
        if reply.get("error").is_some() {
            return serde_json::from_value::<ProviderError>(reply)
                .map_err(|e| ProviderError::invalid(format!("malformed error: {e}")))
                .and_then(Err);
        }
        serde_json::from_value(reply).map_err(|e| ProviderError::invalid(format!("malformed response: {e}")))
    }

    fn model_id(&self, _kind: ProviderKind) -> Option<String> {
        self.model.clone()
    }
}

/// Dispatches each request kind to its own backend.
#[derive(Clone, Default)]
pub struct RoutedBackend {
    routes: BTreeMap<ProviderKind, Arc<dyn Backend>>,
}

impl RoutedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, kind: ProviderKind, backend: Arc<dyn Backend>) -> Self {
        self.routes.insert(kind, backend);
        self
    }

    pub fn kinds(&self) -> impl Iterator<Item = ProviderKind> + '_ {
        self.routes.keys().copied()
    }
}

impl std::fmt::Debug for RoutedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoutedBackend").field("kinds", &self.routes.keys().collect::<Vec<_>>()).finish()
    }
}

#[async_trait]
impl Backend for RoutedBackend {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let kind = request.kind();
        match self.routes.get(&kind) {
            Some(backend) => backend.call(request).await,
            None => Err(ProviderError::NotConfigured { kind }),
        }
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        self.routes.get(&kind).and_then(|b| b.model_id(kind))
    }
}

/// Reads images from local paths, `file://` URIs and `data:` URIs.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalImageSource;

#[async_trait]
impl ImageSource for LocalImageSource {
    async fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        if let Some(rest) = uri.strip_prefix("data:") {
            let (meta, payload) = rest.split_once(',').ok_or("malformed data URI")?;
            if !meta.ends_with(";base64") {
                return Err("only base64 data URIs are supported".into());
            }
            return base64::engine::general_purpose::STANDARD
                .decode(payload.trim())
                .map_err(|e| e.to_string());
        }
        let path = match url::Url::parse(uri) {
            Ok(url) if url.scheme() == "file" => url.to_file_path().map_err(|_| format!("bad file URI {uri}"))?,
            Ok(url) if url.scheme().len() > 1 => return Err(format!("unsupported scheme {}", url.scheme())),
            _ => Path::new(uri).to_path_buf(),
        };
        tokio::fs::read(&path).await.map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Local sources plus `http(s)://` downloads.
pub struct HttpImageSource {
    client: reqwest::Client,
}

impl HttpImageSource {
    pub fn new(timeout: Duration) -> Self {
        Self { client: client(timeout) }
    }
}

#[async_trait]
impl ImageSource for HttpImageSource {
    async fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        if !(uri.starts_with("http://") || uri.starts_with("https://")) {
            return LocalImageSource.fetch(uri).await;
        }
        let response = self.client.get(uri).send().await.map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("HTTP {}", response.status()));
        }
        response.bytes().await.map(|b| b.to_vec()).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockBackend;

    #[tokio::test]
    async fn routing_dispatches_by_kind() {
        let chat: Arc<dyn Backend> = Arc::new(MockBackend::new().chat(|_, _| Some("hi".into())).model(ProviderKind::ChatLlm, "m1"));
        let routed = RoutedBackend::new().route(ProviderKind::ChatLlm, chat);
        let reply = routed
            .call(&ProviderRequest::Chat {
                prompt: "p".into(),
                context: String::new(),
            })
            .await
            .unwrap();
        assert_eq!(reply, ProviderResponse::text("hi"));
        assert_eq!(routed.model_id(ProviderKind::ChatLlm).as_deref(), Some("m1"));
        assert!(matches!(
            routed.call(&ProviderRequest::EmbedText { text: "x".into() }).await,
            Err(ProviderError::NotConfigured { .. })
        ));
    }

    #[tokio::test]
    async fn local_source_reads_paths_and_data_uris() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        std::fs::write(&path, b"abc").unwrap();
        assert_eq!(LocalImageSource.fetch(path.to_str().unwrap()).await.unwrap(), b"abc");
        let file_uri = url::Url::from_file_path(&path).unwrap().to_string();
        assert_eq!(LocalImageSource.fetch(&file_uri).await.unwrap(), b"abc");
        assert_eq!(
            LocalImageSource.fetch("data:image/png;base64,YWJj").await.unwrap(),
            b"abc"
        );
        assert!(LocalImageSource.fetch("ftp://x/y").await.is_err());
    }

    #[test]
    fn status_mapping() {
        assert!(matches!(
            status_error(reqwest::StatusCode::TOO_MANY_REQUESTS, ""),
            ProviderError::QuotaExceeded { .. }
        ));
        assert!(status_error(reqwest::StatusCode::BAD_GATEWAY, "").is_transient());
        assert!(!status_error(reqwest::StatusCode::BAD_REQUEST, "").is_transient());
    }
}
