//! Offline test support: a scripted provider world, the fixture scenarios
//! built on it and helpers to record or replay cassettes.

pub mod scenarios;
pub mod world;

use std::path::PathBuf;
use std::sync::Arc;

use veracity_core::gateway::{Cassette, CassetteError, Gateway, ProviderKind, RecordingBackend, ReplayBackend};
use veracity_core::{GatePolicy, Pipeline, PipelineConfig, RawPost, Registry, RunRecord};

pub use scenarios::{scenario, scenarios, REGISTRY_CSV, SCENARIO_COUNT};
pub use world::{
    fused_description, ImageSpec, MemoryImageSource, PageSpec, ResponseStyle, Scenario, SyntheticBackend,
    DIMENSIONS, IMAGE_EMBEDDER_MODEL, TEXT_EMBEDDER_MODEL,
};

/// Set to `1` to rewrite the committed cassettes.
pub const REGENERATE_ENV: &str = "VERACITY_REGENERATE_FIXTURES";

pub fn registry() -> Arc<Registry> {
    Arc::new(Registry::from_csv_str(REGISTRY_CSV).expect("fixture registry parses"))
}

pub fn raw_post(scenario: &Scenario) -> RawPost {
    serde_json::from_value(scenario.raw_post_json()).expect("fixture post deserializes")
}

/// Gateway over the scripted world for every scenario.
pub fn synthetic_gateway() -> Arc<Gateway> {
    let all = scenarios();
    Gateway::builder(SyntheticBackend::new(all.clone()))
        .image_source(Arc::new(MemoryImageSource::new(&all)))
        .build()
}

/// Gateway answering only from `cassette`. Post images still come from
/// memory since ingestion is not a provider call.
pub fn replay_gateway(cassette: Cassette) -> Arc<Gateway> {
    let backend = ReplayBackend::new(cassette)
        .with_model(ProviderKind::TextEmbedder, TEXT_EMBEDDER_MODEL)
        .with_model(ProviderKind::ImageEmbedder, IMAGE_EMBEDDER_MODEL);
    Gateway::builder(backend)
        .image_source(Arc::new(MemoryImageSource::new(&scenarios())))
        .build()
}

/// Runs one scenario against the scripted world and captures every
/// provider exchange.
pub async fn record_scenario(scenario: &Scenario, config: PipelineConfig) -> (RunRecord, Cassette) {
    let all = scenarios();
    let recorder = Arc::new(RecordingBackend::new(SyntheticBackend::new(all.clone())));
    let gateway = Gateway::builder(recorder.clone())
        .image_source(Arc::new(MemoryImageSource::new(&all)))
        .build();
    let pipeline = Pipeline::new(gateway, registry(), config).expect("fixture config is valid");
    let record = pipeline.run_raw(raw_post(scenario), &GatePolicy::PostTime).await;
    (record, recorder.cassette())
}

pub fn cassette_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("cassettes")
}

pub fn cassette_path(name: &str) -> PathBuf {
    cassette_dir().join(format!("{name}.jsonl"))
}

pub fn load_fixture_cassette(name: &str) -> Result<Cassette, CassetteError> {
    Cassette::load(&cassette_path(name))
}

/// Pipeline replaying the committed cassette of `name`.
pub fn replay_pipeline(name: &str, config: PipelineConfig) -> Result<Pipeline, String> {
    let cassette = load_fixture_cassette(name).map_err(|e| e.to_string())?;
    let id = cassette.id();
    Pipeline::new(replay_gateway(cassette), registry(), config)
        .map(|p| p.with_cassette_id(id))
        .map_err(|e| e.to_string())
}

/// Pipeline replaying all committed cassettes merged into one.
pub fn merged_replay_pipeline(config: PipelineConfig) -> Result<Pipeline, String> {
    let mut merged = Cassette::new();
    for s in scenarios() {
        let cassette = load_fixture_cassette(&s.name).map_err(|e| e.to_string())?;
        for entry in cassette.entries() {
            merged.insert(entry.clone());
        }
    }
    let id = merged.id();
    Pipeline::new(replay_gateway(merged), registry(), config)
        .map(|p| p.with_cassette_id(id))
        .map_err(|e| e.to_string())
}

/// JSON of a run record without its wall-clock fields.
pub fn stable_json(record: &RunRecord) -> String {
    let mut value = serde_json::to_value(record).expect("run records serialize");
    if let Some(map) = value.as_object_mut() {
        map.remove("created_at");
        map.remove("timing");
    }
    value.to_string()
}

/// A post whose image cannot be fetched.
pub fn post_with_missing_image() -> RawPost {
    serde_json::from_value(serde_json::json!({
        "id": "missing_image",
        "text": "Look at this",
        "created_at": "2023-03-02T12:00:00Z",
        "author": {"name": "Casey Morgan", "screen_name": "caseym", "description": ""},
        "images": [{"uri": "fixture://nowhere/0.png"}],
    }))
    .expect("fixture post deserializes")
}
