//! End-to-end pipeline, run records and their on-disk store.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credibility::Registry;
use crate::describer::describe_all;
use crate::domain::{
    validate_post, ConfigError, CorrectionResponse, Diagnostics, InformativeDescription, PipelineConfig, Post,
    PostError, Query, RawPost, RetrievedPage,
};
use crate::evidence::{gather, rank_pages, GatherOutcome};
use crate::gateway::{digest_json, Gateway, ProviderKind, Session};
use crate::response::{generate, generate_no_evidence, ResponseError};
use crate::retrieval::{embed_post, fetch_and_score, generate_queries, run_search, GatePolicy, PageOutcome};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("relevance thresholds were calibrated for {kind} {expected:?} but the gateway serves {actual:?}")]
    CalibrationMismatch {
        kind: ProviderKind,
        expected: String,
        actual: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The generated text failed validation after its retry.
    Rejected,
    /// The post could not be processed at all.
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub wall_time_ms: u64,
}

/// Outcome of one pipeline run. Everything except `created_at` and `timing`
/// is a function of post, config, registry snapshot and provider responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub post_id: String,
    pub config_hash: String,
    pub registry_snapshot: String,
    pub cassette_id: Option<String>,
    pub cutoff_policy: String,
    pub status: RunStatus,
    pub response: Option<CorrectionResponse>,
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    pub timing: RunTiming,
}

/// Run identity: post content, config, and cutoff policy.
pub fn run_id(post_digest: &str, config_hash: &str, cutoff_policy: &str) -> String {
    digest_json(&(post_digest, config_hash, cutoff_policy))[..32].to_string()
}

/// Output of [`Pipeline::retrieve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub cutoff: Option<DateTime<Utc>>,
    pub descriptions: Vec<InformativeDescription>,
    pub queries: Vec<Query>,
    /// One outcome per search hit, in search order.
    pub outcomes: Vec<PageOutcome>,
    /// Kept pages in extraction order.
    pub ranked: Vec<RetrievedPage>,
    pub warnings: Vec<String>,
}

pub struct Pipeline {
    gateway: Arc<Gateway>,
    registry: Arc<Registry>,
    config: PipelineConfig,
    config_hash: String,
    cassette_id: Option<String>,
}

impl Pipeline {
    /// Checks the config and that the gateway's embedders match the ones
    /// the relevance thresholds were calibrated for. Unknown embedder ids
    /// are allowed and reported as a warning on every run.
    pub fn new(gateway: Arc<Gateway>, registry: Arc<Registry>, config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        for (kind, expected) in [
            (ProviderKind::TextEmbedder, &config.calibration.text_embedder),
            (ProviderKind::ImageEmbedder, &config.calibration.image_embedder),
        ] {
            if let Some(actual) = gateway.model_id(kind) {
                if &actual != expected {
                    return Err(PipelineError::CalibrationMismatch {
                        kind,
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
        }
        let config_hash = digest_json(&config);
        Ok(Self {
            gateway,
            registry,
            config,
            config_hash,
            cassette_id: None,
        })
    }

    pub fn with_cassette_id(mut self, id: impl Into<String>) -> Self {
        self.cassette_id = Some(id.into());
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn run_id_for(&self, post: &Post, policy: &GatePolicy) -> String {
        run_id(&digest_json(post), &self.config_hash, &policy.to_string())
    }

    /// Validates a raw post (resolving its images) and runs it.
    pub async fn run_raw(&self, raw: RawPost, policy: &GatePolicy) -> RunRecord {
        let started = Instant::now();
        let fallback_id = raw.id.clone().unwrap_or_default();
        match validate_post(raw, self.gateway.image_source(), self.gateway.images()).await {
            Ok(post) => self.run(&post, policy).await,
            Err(e) => self.failed_record(&fallback_id, &digest_json(&fallback_id), policy, &e, started),
        }
    }

    fn failed_record(
        &self,
        post_id: &str,
        post_digest: &str,
        policy: &GatePolicy,
        error: &PostError,
        started: Instant,
    ) -> RunRecord {
        RunRecord {
            run_id: run_id(post_digest, &self.config_hash, &policy.to_string()),
            post_id: post_id.to_string(),
            config_hash: self.config_hash.clone(),
            registry_snapshot: self.registry.snapshot_hash().to_string(),
            cassette_id: self.cassette_id.clone(),
            cutoff_policy: policy.to_string(),
            status: RunStatus::Failed,
            response: None,
            error: Some(error.to_string()),
            created_at: Utc::now(),
            timing: RunTiming {
                wall_time_ms: started.elapsed().as_millis() as u64,
            },
        }
    }

    pub async fn run(&self, post: &Post, policy: &GatePolicy) -> RunRecord {
        let started = Instant::now();
        let session = self.gateway.session();
        let mut diagnostics = Diagnostics {
            registry_snapshot: self.registry.snapshot_hash().to_string(),
            ..Diagnostics::default()
        };
        for kind in [ProviderKind::TextEmbedder, ProviderKind::ImageEmbedder] {
            if self.gateway.model_id(kind).is_none() {
                diagnostics.warn(format!("{kind} identity unknown; relevance thresholds unverified"));
            }
        }
        let result = self.execute(&session, post, policy, &mut diagnostics).await;
        diagnostics.absorb_calls(session.calls());
        diagnostics.wall_time = started.elapsed();

        let (status, response, error) = match result {
            Ok(mut response) => {
                response.diagnostics = diagnostics;
                (RunStatus::Completed, Some(response), None)
            }
            Err(ResponseError::FormatViolation { flags, .. }) => (
                RunStatus::Rejected,
                None,
                Some(format!("response failed validation after retry: {flags:?}")),
            ),
            Err(ResponseError::Provider(e)) => (RunStatus::Failed, None, Some(e.to_string())),
        };
        RunRecord {
            run_id: self.run_id_for(post, policy),
            post_id: post.id.clone(),
            config_hash: self.config_hash.clone(),
            registry_snapshot: self.registry.snapshot_hash().to_string(),
            cassette_id: self.cassette_id.clone(),
            cutoff_policy: policy.to_string(),
            status,
            response,
            error,
            created_at: Utc::now(),
            timing: RunTiming {
                wall_time_ms: started.elapsed().as_millis() as u64,
            },
        }
    }

    /// Runs the retrieval half of the pipeline: describe, query, search,
    /// fetch, gate, score and rank.
    pub async fn retrieve(&self, post: &Post, policy: &GatePolicy) -> Retrieval {
        let session = self.gateway.session();
        let mut diagnostics = Diagnostics::default();
        let mut retrieval = self.retrieve_with(&session, post, policy, &mut diagnostics).await;
        retrieval.warnings = diagnostics.warnings;
        retrieval
    }

    /// Describes the post's images and runs extraction over `pages` in the
    /// given order with the early-stop rule.
    pub async fn extract(&self, post: &Post, pages: &[RetrievedPage]) -> GatherOutcome {
        let session = self.gateway.session();
        let descriptions = self.describe(&session, post, &mut Diagnostics::default()).await;
        gather(&session, pages, post, &descriptions, &self.config).await
    }

    async fn describe(&self, session: &Session, post: &Post, diagnostics: &mut Diagnostics) -> Vec<InformativeDescription> {
        describe_all(session, &post.images)
            .await
            .into_iter()
            .zip(&post.images)
            .filter_map(|(result, image)| match result {
                Ok(d) => Some(d),
                Err(e) => {
                    diagnostics.warn(format!("describing {} failed: {e}", image.uri));
                    None
                }
            })
            .collect()
    }

    async fn retrieve_with(
        &self,
        session: &Session,
        post: &Post,
        policy: &GatePolicy,
        diagnostics: &mut Diagnostics,
    ) -> Retrieval {
        let config = &self.config;
        let gate = policy.resolve(post);
        diagnostics.cutoff = gate.map(|g| g.cutoff);
        let mut retrieval = Retrieval {
            cutoff: diagnostics.cutoff,
            descriptions: self.describe(session, post, diagnostics).await,
            ..Retrieval::default()
        };

        retrieval.queries = match generate_queries(session, post, &retrieval.descriptions, config.query_count(post)).await {
            Ok(q) => q,
            Err(e) => {
                diagnostics.warn(format!("query generation failed: {e}"));
                Vec::new()
            }
        };
        if retrieval.queries.is_empty() {
            return retrieval;
        }

        let scope = self.registry.scope();
        if scope.is_empty() {
            diagnostics.warn("registry admits no publishers");
            return retrieval;
        }
        let search = run_search(session, &retrieval.queries, post, &self.registry, &scope, config).await;
        diagnostics.warnings.extend(search.failures);
        diagnostics.pages_searched = search.urls.len() as u64;
        if search.urls.is_empty() {
            return retrieval;
        }

        let post_embeddings = match embed_post(session, post, &retrieval.descriptions).await {
            Ok(e) => e,
            Err(e) => {
                diagnostics.warn(format!("embedding the post failed: {e}"));
                return retrieval;
            }
        };
        let post_embeddings = &post_embeddings;
        let gate = gate.as_ref();
        retrieval.outcomes = stream::iter(search.urls.iter().cloned())
            .map(|url| async move {
                fetch_and_score(session, post, post_embeddings, &url, &self.registry, gate, config).await
            })
            .buffered(config.parallelism)
            .collect()
            .await;
        let mut kept = Vec::new();
        for outcome in &retrieval.outcomes {
            match outcome {
                PageOutcome::Kept { page, .. } => {
                    diagnostics.pages_fetched += 1;
                    kept.push(page.clone());
                }
                PageOutcome::Dropped { .. } => diagnostics.pages_fetched += 1,
                PageOutcome::Excluded { .. } => {}
                PageOutcome::Failed { url, error } => diagnostics.warn(format!("page {url}: {error}")),
            }
        }
        diagnostics.pages_kept = kept.len() as u64;
        retrieval.ranked = rank_pages(kept);
        retrieval
    }

    async fn execute(
        &self,
        session: &Session,
        post: &Post,
        policy: &GatePolicy,
        diagnostics: &mut Diagnostics,
    ) -> Result<CorrectionResponse, ResponseError> {
        let retrieval = self.retrieve_with(session, post, policy, diagnostics).await;
        if retrieval.ranked.is_empty() {
            return Ok(generate_no_evidence(post));
        }
        let gathered = gather(session, &retrieval.ranked, post, &retrieval.descriptions, &self.config).await;
        diagnostics.pages_extracted = gathered.results.len() as u64;
        diagnostics.warnings.extend(gathered.failures);
        if gathered.items.is_empty() {
            return Ok(generate_no_evidence(post));
        }
        generate(session, post, &retrieval.descriptions, &gathered.items).await
    }
}

/// Runs posts with up to `parallelism` in flight; output follows input order.
pub async fn run_batch(pipeline: &Pipeline, posts: Vec<RawPost>, policy: &GatePolicy, parallelism: usize) -> Vec<RunRecord> {
    stream::iter(posts)
        .map(|raw| pipeline.run_raw(raw, policy))
        .buffered(parallelism.max(1))
        .collect()
        .await
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("run store record {path}: {source}")]
    Corrupt {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run_id: String,
    pub post_id: String,
    pub status: RunStatus,
    pub created_at: DateTime<Utc>,
}

/// Append-only directory of run records: `runs/<id>.json` plus
/// `index.jsonl`. Records are never overwritten.
pub struct RunStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(root.join("runs"))?;
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, run_id: &str) -> Option<PathBuf> {
        run_id
            .chars()
            .all(|c| c.is_ascii_hexdigit())
            .then(|| self.root.join("runs").join(format!("{run_id}.json")))
    }

    pub fn get(&self, run_id: &str) -> Result<Option<RunRecord>, StoreError> {
        let Some(path) = self.path(run_id) else {
            return Ok(None);
        };
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|source| StoreError::Corrupt {
                path: path.display().to_string(),
                source,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes `record` unless its id exists. Returns the stored record and
    /// whether it was newly written.
    pub fn put(&self, record: &RunRecord) -> Result<(RunRecord, bool), StoreError> {
        let _guard = self.write_lock.lock().expect("run store lock poisoned");
        if let Some(existing) = self.get(&record.run_id)? {
            return Ok((existing, false));
        }
        let path = self
            .path(&record.run_id)
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "run id must be hex"))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(record).expect("run records serialize"))?;
        std::fs::rename(&tmp, &path)?;
        let entry = IndexEntry {
            run_id: record.run_id.clone(),
            post_id: record.post_id.clone(),
            status: record.status,
            created_at: record.created_at,
        };
        let mut index = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("index.jsonl"))?;
        writeln!(index, "{}", serde_json::to_string(&entry).expect("index entries serialize"))?;
        Ok((record.clone(), true))
    }

    /// Index entries in write order, one per run id.
    pub fn list(&self) -> Result<Vec<IndexEntry>, StoreError> {
        let path = self.root.join("index.jsonl");
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let entry: IndexEntry = serde_json::from_str(line).map_err(|source| StoreError::Corrupt {
                path: path.display().to_string(),
                source,
            })?;
            if seen.insert(entry.run_id.clone(), ()).is_none() {
                out.push(entry);
            }
        }
        Ok(out)
    }
}
