//! Record/replay of provider traffic.
//!
//! A cassette is JSON lines of `{kind, request_digest, request, response}`.
//! Replays are keyed by `(kind, request_digest)`, so identical requests get
//! identical responses regardless of call order.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{digest_json, Backend, ProviderError, ProviderKind, ProviderRequest, ProviderResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok(ProviderResponse),
    Error(ProviderError),
}

impl From<Outcome> for Result<ProviderResponse, ProviderError> {
    fn from(outcome: Outcome) -> Self {
        match outcome {
            Outcome::Ok(response) => Ok(response),
            Outcome::Error(err) => Err(err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub kind: ProviderKind,
    pub request_digest: String,
    pub request: ProviderRequest,
    pub response: Outcome,
}

#[derive(Debug, Error)]
pub enum CassetteError {
    #[error("cassette io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cassette line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
    index: HashMap<(ProviderKind, String), usize>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, CassetteError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, CassetteError> {
        let mut cassette = Cassette::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| CassetteError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            if entry.request_digest != entry.request.digest() {
                return Err(CassetteError::Parse {
                    line: n + 1,
                    message: "request_digest does not match request".into(),
                });
            }
            cassette.insert(entry);
        }
        Ok(cassette)
    }

    /// Adds an entry unless one already exists for the same request.
    pub fn insert(&mut self, entry: CassetteEntry) -> bool {
        let key = (entry.kind, entry.request_digest.clone());
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.entries.len());
        self.entries.push(entry);
        true
    }

    pub fn get(&self, kind: ProviderKind, digest: &str) -> Option<&CassetteEntry> {
        self.index
            .get(&(kind, digest.to_string()))
            .map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[CassetteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in canonical order, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut sorted: Vec<&CassetteEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| (a.kind, &a.request_digest).cmp(&(b.kind, &b.request_digest)));
        let mut out = String::new();
        for entry in sorted {
            out.push_str(&serde_json::to_string(entry).expect("cassette entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CassetteError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    /// Content identity of the cassette, independent of recording order.
    pub fn id(&self) -> String {
        digest_json(&self.to_jsonl())
    }
}

/// Serves responses from a cassette; unknown requests are misses.
pub struct ReplayBackend {
    cassette: Cassette,
    models: BTreeMap<ProviderKind, String>,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        Self {
            cassette,
            models: BTreeMap::new(),
        }
    }

    /// Declares which model the recorded traffic came from.
    pub fn with_model(mut self, kind: ProviderKind, model: impl Into<String>) -> Self {
        self.models.insert(kind, model.into());
        self
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }
}

#[async_trait]
impl Backend for ReplayBackend {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let kind = request.kind();
        let digest = request.digest();
        match self.cassette.get(kind, &digest) {
            Some(entry) => entry.response.clone().into(),
            None => Err(ProviderError::CassetteMiss { kind, digest }),
        }
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        self.models.get(&kind).cloned()
    }
}

/// Passes requests to `inner` and keeps every deterministic outcome.
/// Transient failures are not recorded.
pub struct RecordingBackend<B> {
    inner: B,
    tape: Mutex<Cassette>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            tape: Mutex::new(Cassette::new()),
        }
    }

    pub fn cassette(&self) -> Cassette {
        self.tape.lock().expect("recording tape poisoned").clone()
    }
}

#[async_trait]
impl<B: Backend> Backend for RecordingBackend<B> {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let result = self.inner.call(request).await;
        let outcome = match &result {
            Ok(response) => Some(Outcome::Ok(response.clone())),
            Err(err) if !err.is_transient() => Some(Outcome::Error(err.clone())),
            Err(_) => None,
        };
        if let Some(response) = outcome {
            self.tape
                .lock()
                .expect("recording tape poisoned")
                .insert(CassetteEntry {
                    kind: request.kind(),
                    request_digest: request.digest(),
                    request: request.clone(),
                    response,
                });
        }
        result
    }

    fn model_id(&self, kind: ProviderKind) -> Option<String> {
        self.inner.model_id(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockBackend;

    fn chat(prompt: &str) -> ProviderRequest {
        ProviderRequest::Chat {
            prompt: prompt.into(),
            context: String::new(),
        }
    }

    #[tokio::test]
    async fn record_then_replay() {
        let recorder = RecordingBackend::new(MockBackend::new().chat(|p, _| Some(format!("re: {p}"))));
        recorder.call(&chat("a")).await.unwrap();
        recorder.call(&chat("b")).await.unwrap();
        let cassette = recorder.cassette();
        assert_eq!(cassette.len(), 2);

        let text = cassette.to_jsonl();
        let reloaded = Cassette::from_reader(text.as_bytes()).unwrap();
        assert_eq!(reloaded.id(), cassette.id());

        let replay = ReplayBackend::new(reloaded);
        assert_eq!(replay.call(&chat("b")).await.unwrap(), ProviderResponse::text("re: b"));
        assert!(matches!(
            replay.call(&chat("c")).await,
            Err(ProviderError::CassetteMiss { .. })
        ));
    }

    #[tokio::test]
    async fn deterministic_errors_are_recorded() {
        let mock = MockBackend::new().on(ProviderKind::ContentExtractor, |req| match req {
            ProviderRequest::ExtractContent { url } => Err(ProviderError::FetchFailed {
                url: url.clone(),
                reason: "404".into(),
            }),
            _ => unreachable!(),
        });
        let recorder = RecordingBackend::new(mock);
        let req = ProviderRequest::ExtractContent {
            url: "https://x.org/missing".into(),
        };
        assert!(recorder.call(&req).await.is_err());
        let replay = ReplayBackend::new(recorder.cassette());
        assert!(matches!(
            replay.call(&req).await,
            Err(ProviderError::FetchFailed { .. })
        ));
    }

    #[test]
    fn tampered_digest_is_rejected() {
        let entry = CassetteEntry {
            kind: ProviderKind::ChatLlm,
            request_digest: "0".repeat(64),
            request: chat("a"),
            response: Outcome::Ok(ProviderResponse::text("x")),
        };
        let line = serde_json::to_string(&entry).unwrap();
        assert!(matches!(
            Cassette::from_reader(line.as_bytes()),
            Err(CassetteError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn id_ignores_recording_order() {
        let make = |order: &[&str]| {
            let mut c = Cassette::new();
            for p in order {
                let request = chat(p);
                c.insert(CassetteEntry {
                    kind: request.kind(),
                    request_digest: request.digest(),
                    request,
                    response: Outcome::Ok(ProviderResponse::text(*p)),
                });
            }
            c
        };
        assert_eq!(make(&["a", "b"]).id(), make(&["b", "a"]).id());
    }
}
