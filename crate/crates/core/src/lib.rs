//! Credibility-aware, multimodal misinformation correction.
//!
//! A post goes through image description, query generation, scoped web
//! search, relevance and time filtering, credibility ranking, quote
//! extraction and response generation. All external services sit behind
//! [`gateway::Backend`] so runs can be recorded and replayed.

pub mod credibility;
pub mod describer;
pub mod domain;
pub mod evidence;
pub mod gateway;
pub mod images;
pub mod orchestrator;
pub mod prompts;
pub mod response;
pub mod retrieval;
pub mod text;

pub use credibility::{BiasRating, FactualityRating, PublisherRecord, Registry, Scope};
pub use domain::{
    CorrectionResponse, Diagnostics, EvidenceItem, EvidenceKind, ImageRef, InformativeDescription, PipelineConfig,
    Post, Priority, Query, RawPost, RetrievedPage,
};
pub use gateway::{Gateway, ProviderKind, Session};
pub use orchestrator::{run_batch, Pipeline, Retrieval, RunRecord, RunStatus, RunStore};
pub use retrieval::{GatePolicy, TimeGate};
