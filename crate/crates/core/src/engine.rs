//! Layer and model registries and the layer-application pipeline.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde_json::Value as Json;
use thiserror::Error;

use crate::assets::AssetPool;
use crate::layers;
use crate::model::SequenceModel;
use crate::providers::{
    EmbeddingProvider, ImageProvider, LexiconSentiment, SentimentProvider, StubImageProvider,
    TableEmbedding,
};
use crate::rng::{stream, StreamRng};

/// Conventional provider names looked up by the built-in layers.
pub mod model_names {
    pub const IMAGE: &str = "image";
    pub const SENTIMENT: &str = "sentiment";
    pub const EMBEDDING: &str = "embedding";
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayerError {
    #[error("name `{0}` is already registered")]
    DuplicateName(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("layer `{layer}` failed: {message}")]
    LayerFailure { layer: String, message: String },
    #[error("model provider `{0}` is not registered")]
    ProviderUnavailable(String),
    #[error("image generation failed: {0}")]
    GenerationFailed(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("{0}")]
    Failed(String),
}

impl LayerError {
    pub fn failed(err: impl core::fmt::Display) -> Self {
        LayerError::Failed(err.to_string())
    }

    pub fn param(name: &str, reason: impl Into<String>) -> Self {
        LayerError::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone)]
pub enum ModelHandle {
    Image(Arc<dyn ImageProvider>),
    Sentiment(Arc<dyn SentimentProvider>),
    Embedding(Arc<dyn EmbeddingProvider>),
}

impl ModelHandle {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelHandle::Image(_) => "image",
            ModelHandle::Sentiment(_) => "sentiment",
            ModelHandle::Embedding(_) => "embedding",
        }
    }
}

impl core::fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "ModelHandle::{}", self.kind())
    }
}

#[derive(Clone, Debug, Default)]
pub struct ModelRegistry {
    entries: BTreeMap<String, ModelHandle>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Offline providers under the conventional names: stub image
    /// generator, lexicon sentiment classifier and table embeddings.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.entries.insert(
            model_names::IMAGE.into(),
            ModelHandle::Image(Arc::new(StubImageProvider::default())),
        );
        reg.entries.insert(
            model_names::SENTIMENT.into(),
            ModelHandle::Sentiment(Arc::new(LexiconSentiment::builtin())),
        );
        reg.entries.insert(
            model_names::EMBEDDING.into(),
            ModelHandle::Embedding(Arc::new(TableEmbedding::builtin())),
        );
        reg
    }

    pub fn register(&mut self, name: &str, handle: ModelHandle) -> Result<(), LayerError> {
        if self.entries.contains_key(name) {
            return Err(LayerError::DuplicateName(name.to_string()));
        }
        self.entries.insert(name.to_string(), handle);
        Ok(())
    }

    /// Swaps the provider under `name`, returning the previous one.
    pub fn replace(&mut self, name: &str, handle: ModelHandle) -> Option<ModelHandle> {
        self.entries.insert(name.to_string(), handle)
    }

    pub fn unregister(&mut self, name: &str) -> Option<ModelHandle> {
        self.entries.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&ModelHandle> {
        self.entries.get(name)
    }

    /// (name, kind) pairs in name order.
    pub fn list(&self) -> Vec<(String, &'static str)> {
        self.entries
            .iter()
            .map(|(n, h)| (n.clone(), h.kind()))
            .collect()
    }

    pub fn image(&self, name: &str) -> Result<Arc<dyn ImageProvider>, LayerError> {
        match self.entries.get(name) {
            Some(ModelHandle::Image(p)) => Ok(p.clone()),
            _ => Err(LayerError::ProviderUnavailable(name.to_string())),
        }
    }

    pub fn sentiment(&self, name: &str) -> Result<Arc<dyn SentimentProvider>, LayerError> {
        match self.entries.get(name) {
            Some(ModelHandle::Sentiment(p)) => Ok(p.clone()),
            _ => Err(LayerError::ProviderUnavailable(name.to_string())),
        }
    }

    pub fn embedding(&self, name: &str) -> Result<Arc<dyn EmbeddingProvider>, LayerError> {
        match self.entries.get(name) {
            Some(ModelHandle::Embedding(p)) => Ok(p.clone()),
            _ => Err(LayerError::ProviderUnavailable(name.to_string())),
        }
    }
}

/// Inputs shared by every layer of one pipeline run.
pub struct GenerationContext<'a> {
    pub seed: u64,
    pub assets: &'a mut AssetPool,
    pub models: &'a ModelRegistry,
    /// Per-layer parameter objects keyed by layer name.
    pub params: BTreeMap<String, Json>,
}

impl<'a> GenerationContext<'a> {
    pub fn new(seed: u64, assets: &'a mut AssetPool, models: &'a ModelRegistry) -> Self {
        GenerationContext {
            seed,
            assets,
            models,
            params: BTreeMap::new(),
        }
    }

    pub fn with_params(mut self, layer: &str, params: Json) -> Self {
        self.params.insert(layer.to_string(), params);
        self
    }
}

/// What a single layer sees while it runs.
pub struct LayerContext<'a> {
    pub seed: u64,
    /// Stream derived from (seed, layer name, occurrence of that name).
    pub rng: StreamRng,
    pub assets: &'a mut AssetPool,
    pub models: &'a ModelRegistry,
    pub params: &'a Json,
}

impl LayerContext<'_> {
    pub fn param(&self, key: &str) -> Option<&Json> {
        self.params.get(key)
    }

    pub fn f64_param(&self, key: &str, default: f64) -> Result<f64, LayerError> {
        match self.param(key) {
            None | Some(Json::Null) => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| LayerError::param(key, "expected a number")),
        }
    }

    pub fn usize_param(&self, key: &str, default: usize) -> Result<usize, LayerError> {
        match self.param(key) {
            None | Some(Json::Null) => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| LayerError::param(key, "expected a non-negative integer")),
        }
    }

    pub fn bool_param(&self, key: &str, default: bool) -> Result<bool, LayerError> {
        match self.param(key) {
            None | Some(Json::Null) => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| LayerError::param(key, "expected a boolean")),
        }
    }

    pub fn str_param(&self, key: &str) -> Result<Option<&str>, LayerError> {
        match self.param(key) {
            None | Some(Json::Null) => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| LayerError::param(key, "expected a string")),
        }
    }

    /// Deserializes an optional structured parameter.
    pub fn typed_param<T: serde::de::DeserializeOwned>(
        &self,
        key: &str,
    ) -> Result<Option<T>, LayerError> {
        match self.param(key) {
            None | Some(Json::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| LayerError::param(key, e.to_string())),
        }
    }
}

pub trait Layer: Send + Sync {
    fn name(&self) -> &str;

    fn description(&self) -> &str {
        ""
    }

    /// Edits `seq` in place. On error the pipeline discards every change.
    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError>;
}

#[derive(Default)]
pub struct LayerRegistry {
    layers: BTreeMap<String, Arc<dyn Layer>>,
}

impl LayerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the six built-in layers.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        for layer in layers::builtin_layers() {
            reg.register(layer).expect("built-in names are unique");
        }
        reg
    }

    pub fn register(&mut self, layer: Box<dyn Layer>) -> Result<(), LayerError> {
        let name = layer.name().to_string();
        if self.layers.contains_key(&name) {
            return Err(LayerError::DuplicateName(name));
        }
        self.layers.insert(name, Arc::from(layer));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Layer>> {
        self.layers.get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.layers.keys().cloned().collect()
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        self.layers
            .iter()
            .map(|(n, l)| (n.clone(), l.description().to_string()))
            .collect()
    }
}

/// Runs layer pipelines against a registry.
pub struct Generator {
    pub layers: LayerRegistry,
    pub models: ModelRegistry,
}

impl Default for Generator {
    fn default() -> Self {
        Generator {
            layers: LayerRegistry::builtin(),
            models: ModelRegistry::builtin(),
        }
    }
}

impl Generator {
    pub fn new(layers: LayerRegistry, models: ModelRegistry) -> Self {
        Generator { layers, models }
    }

    /// Applies `names` left to right. Either every layer succeeds and the
    /// sequence and asset pool take the result, or both are left exactly as
    /// they were. The revision is bumped once when anything changed.
    pub fn apply_layers(
        &self,
        seq: &mut SequenceModel,
        names: &[&str],
        seed: u64,
        assets: &mut AssetPool,
        params: &BTreeMap<String, Json>,
    ) -> Result<(), LayerError> {
        let resolved = names
            .iter()
            .map(|n| {
                self.layers
                    .get(n)
                    .ok_or_else(|| LayerError::UnknownLayer(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut work = seq.clone();
        let mut pool = assets.clone();
        let empty = Json::Object(Default::default());
        let mut seen: BTreeMap<&str, u64> = BTreeMap::new();
        for (name, layer) in names.iter().zip(resolved) {
            let occurrence = seen.entry(name).or_insert(0);
            let mut ctx = LayerContext {
                seed,
                rng: stream(seed, name, *occurrence),
                assets: &mut pool,
                models: &self.models,
                params: params.get(*name).unwrap_or(&empty),
            };
            *occurrence += 1;
            layer
                .apply(&mut work, &mut ctx)
                .map_err(|e| LayerError::LayerFailure {
                    layer: name.to_string(),
                    message: e.to_string(),
                })?;
            work.validate().map_err(|e| LayerError::LayerFailure {
                layer: name.to_string(),
                message: e.to_string(),
            })?;
        }
        if work != *seq {
            work.bump_revision();
            *seq = work;
        }
        if pool != *assets {
            *assets = pool;
        }
        Ok(())
    }

    /// [`Generator::apply_layers`] with a [`GenerationContext`].
    pub fn run(
        &self,
        seq: &mut SequenceModel,
        names: &[&str],
        ctx: &mut GenerationContext<'_>,
    ) -> Result<(), LayerError> {
        self.apply_layers(seq, names, ctx.seed, ctx.assets, &ctx.params)
    }
}
