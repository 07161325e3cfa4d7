use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{HtmlExtractor, HttpFetcher};
use super::live::{JsonAdapter, OpenAiChat, OpenAiEmbeddings, RoutedBackend};
use super::{Backend, GatewayBuilder, ProviderKind, TokenUsage};
use crate::images::ImageStore;

/// Monetary cost model for one provider kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub per_call: f64,
    pub per_1k_input_tokens: f64,
    pub per_1k_output_tokens: f64,
}

impl CostTable {
    pub fn price(&self, tokens: TokenUsage) -> f64 {
        self.per_call
            + tokens.input as f64 / 1000.0 * self.per_1k_input_tokens
            + tokens.output as f64 / 1000.0 * self.per_1k_output_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay_ms: 250,
        }
    }
}

/// Wire protocol spoken by a configured endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// OpenAI-compatible `/chat/completions`.
    OpenaiChat,
    /// OpenAI-compatible `/embeddings`.
    OpenaiEmbeddings,
    /// POSTs the provider request JSON, expects a provider response JSON.
    JsonAdapter,
    /// Local HTTP fetch plus HTML main-content extraction.
    BuiltinExtractor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    pub protocol: Protocol,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the credential.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub max_context_tokens: Option<usize>,
    #[serde(default)]
    pub cost: CostTable,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_in_flight() -> usize {
    8
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvidersConfig {
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub providers: BTreeMap<ProviderKind, ProviderSettings>,
}

#[derive(Debug, Error)]
pub enum ProvidersConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{kind}: {message}")]
    Invalid { kind: ProviderKind, message: String },
    #[error("{kind}: environment variable {var} is not set")]
    MissingCredential { kind: ProviderKind, var: String },
}

impl ProvidersConfig {
    /// Loads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self, ProvidersConfigError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ProvidersConfigError::Io {
            path: display.clone(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|ext| ext == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ProvidersConfigError::Parse { path: display, message })
    }

    /// Applies limits, costs, context windows and model ids to a gateway.
    pub fn apply(&self, mut builder: GatewayBuilder) -> GatewayBuilder {
        builder = builder.retry(self.retry);
        for (&kind, settings) in &self.providers {
            builder = builder
                .in_flight_limit(kind, settings.max_in_flight)
                .cost(kind, settings.cost);
            if let Some(limit) = settings.max_context_tokens {
                builder = builder.context_limit(kind, limit);
            }
            if let Some(model) = &settings.model {
                builder = builder.model(kind, model.clone());
            }
        }
        builder
    }

    /// Builds live backends for every configured kind.
    pub fn build_backend(&self, images: Arc<ImageStore>) -> Result<RoutedBackend, ProvidersConfigError> {
        let mut routed = RoutedBackend::new();
        for (&kind, settings) in &self.providers {
            let credential = match &settings.credential_env {
                Some(var) => Some(std::env::var(var).map_err(|_| ProvidersConfigError::MissingCredential {
                    kind,
                    var: var.clone(),
                })?),
                None => None,
            };
            let timeout = Duration::from_secs(settings.timeout_secs);
            let endpoint = || {
                settings.endpoint.clone().ok_or_else(|| ProvidersConfigError::Invalid {
                    kind,
                    message: "endpoint is required".into(),
                })
            };
            let model = || {
                settings.model.clone().ok_or_else(|| ProvidersConfigError::Invalid {
                    kind,
                    message: "model is required".into(),
                })
            };
            let backend: Arc<dyn Backend> = match settings.protocol {
                Protocol::OpenaiChat => {
                    if kind != ProviderKind::ChatLlm {
                        return Err(ProvidersConfigError::Invalid {
                            kind,
                            message: "openai_chat only serves chat_llm".into(),
                        });
                    }
                    Arc::new(OpenAiChat::new(endpoint()?, credential, model()?, timeout))
                }
                Protocol::OpenaiEmbeddings => {
                    if kind != ProviderKind::TextEmbedder {
                        return Err(ProvidersConfigError::Invalid {
                            kind,
                            message: "openai_embeddings only serves text_embedder".into(),
                        });
                    }
                    Arc::new(OpenAiEmbeddings::new(endpoint()?, credential, model()?, timeout))
                }
                Protocol::JsonAdapter => Arc::new(JsonAdapter::new(
                    endpoint()?,
                    credential,
                    settings.model.clone(),
                    images.clone(),
                    timeout,
                )),
                Protocol::BuiltinExtractor => {
                    if kind != ProviderKind::ContentExtractor {
                        return Err(ProvidersConfigError::Invalid {
                            kind,
                            message: "builtin_extractor only serves content_extractor".into(),
                        });
                    }
                    Arc::new(HtmlExtractor::new(HttpFetcher::new(timeout)))
                }
            };
            routed = routed.route(kind, backend);
        }
        Ok(routed)
    }
}
