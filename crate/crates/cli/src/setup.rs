//! Turning command line options into a configured pipeline.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use veracity_core::gateway::{
    Cassette, Gateway, HttpImageSource, ProvidersConfig, RecordingBackend, ReplayBackend, RoutedBackend,
};
use veracity_core::{Pipeline, PipelineConfig, Registry};

/// Contents of the `--config` file: a `[pipeline]` table plus the provider
/// settings (`[retry]`, `[providers.<kind>]`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(flatten)]
    pub providers: ProvidersConfig,
}

impl AppConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub config: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    /// Replay provider calls from this cassette instead of going live.
    pub cassette: Option<PathBuf>,
    /// Record live provider calls to this cassette.
    pub record: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

/// A pipeline plus the recorder to flush when the command finishes.
pub struct Assembled {
    pub pipeline: Arc<Pipeline>,
    recorder: Option<(Arc<RecordingBackend<RoutedBackend>>, PathBuf)>,
}

impl Assembled {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline: Arc::new(pipeline),
            recorder: None,
        }
    }

    /// Writes the recorded cassette, if recording.
    pub fn finish(&self) -> anyhow::Result<()> {
        if let Some((recorder, path)) = &self.recorder {
            recorder
                .cassette()
                .save(path)
                .with_context(|| format!("writing cassette {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn assemble(options: &PipelineOptions) -> anyhow::Result<Assembled> {
    let app = match &options.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    let mut config = app.pipeline.clone();
    if let Some(p) = options.parallelism {
        config.parallelism = p;
    }
    let Some(registry_path) = &options.registry else {
        bail!("--registry is required");
    };
    let registry = Arc::new(Registry::load(registry_path)?);
    let images = Arc::new(HttpImageSource::new(Duration::from_secs(30)));

    if let Some(path) = &options.cassette {
        if options.record.is_some() {
            bail!("--cassette and --record are mutually exclusive");
        }
        let cassette = Cassette::load(path).with_context(|| format!("loading cassette {}", path.display()))?;
        let id = cassette.id();
        let builder = app.providers.apply(Gateway::builder(ReplayBackend::new(cassette)));
        let gateway = builder.image_source(images).build();
        let pipeline = Pipeline::new(gateway, registry, config)?.with_cassette_id(id);
        return Ok(Assembled::new(pipeline));
    }

    if app.providers.providers.is_empty() {
        bail!("no providers configured; pass --config with [providers] or replay with --cassette");
    }
    let store = Arc::new(veracity_core::images::ImageStore::new());
    let live = app.providers.build_backend(store.clone())?;
    match &options.record {
        Some(path) => {
            let recorder = Arc::new(RecordingBackend::new(live));
            let gateway = app
                .providers
                .apply(Gateway::builder(recorder.clone()))
                .images(store)
                .image_source(images)
                .build();
            Ok(Assembled {
                pipeline: Arc::new(Pipeline::new(gateway, registry, config)?),
                recorder: Some((recorder, path.clone())),
            })
        }
        None => {
            let gateway = app
                .providers
                .apply(Gateway::builder(live))
                .images(store)
                .image_source(images)
                .build();
            Ok(Assembled::new(Pipeline::new(gateway, registry, config)?))
        }
    }
}
