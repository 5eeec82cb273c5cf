//! Configuration shared by `serve` and `generate`.
//!
//! Files are TOML, or JSON when the name ends in `.json`. Environment
//! variables with the `COMICWEAVE_` prefix override file values:
//!
//! | variable                         | key                              |
//! |----------------------------------|----------------------------------|
//! | `COMICWEAVE_HOST`                | `server.host`                    |
//! | `COMICWEAVE_PORT`                | `server.port`                    |
//! | `COMICWEAVE_ASSET_ROOTS`         | `assets.roots` (`:`-separated)   |
//! | `COMICWEAVE_OUTPUT_DIR`          | `output.dir`                     |
//! | `COMICWEAVE_SNAPSHOT`            | `server.snapshot`                |
//! | `COMICWEAVE_IMAGE_ENDPOINT`      | `providers.image.endpoint`       |
//! | `COMICWEAVE_SENTIMENT_ENDPOINT`  | `providers.sentiment.endpoint`   |
//! | `COMICWEAVE_EMBEDDING_ENDPOINT`  | `providers.embedding.endpoint`   |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use comicweave_core::assets::AssetPool;
use comicweave_core::engine::{model_names, ModelHandle};
use comicweave_core::layers::DeclarativeLayer;
use comicweave_core::render::StripLayout;
use comicweave_core::transitions::TransitionWeights;
use comicweave_core::{Generator, LayerRegistry, ModelRegistry};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::assets_io::{self, AssetIoError};
use crate::remote::{
    ConfigError as RemoteConfigError, RemoteEmbeddingProvider, RemoteImageProvider,
    RemoteProviderConfig, RemoteSentimentProvider,
};

pub const ENV_PREFIX: &str = "COMICWEAVE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("bad value for {key}: {reason}")]
    Env { key: String, reason: String },
    #[error("provider `{name}`: {source}")]
    Provider {
        name: String,
        source: RemoteConfigError,
    },
    #[error(transparent)]
    Assets(#[from] AssetIoError),
    #[error("layer file {path}: {reason}")]
    Layer { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Sessions are written here on shutdown and read back on start.
    pub snapshot: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            snapshot: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetsConfig {
    /// Each subdirectory of a root is imported as a set of the same name.
    pub roots: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    #[serde(flatten)]
    pub remote: RemoteProviderConfig,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    #[serde(flatten)]
    pub remote: RemoteProviderConfig,
    pub dimension: Option<usize>,
}

/// Remote replacements for the offline models; absent means offline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub image: Option<RemoteProviderConfig>,
    pub sentiment: Option<SentimentConfig>,
    pub embedding: Option<EmbeddingConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayersConfig {
    /// Declarative layer files (`*.json`) registered at start.
    pub dir: Option<PathBuf>,
    /// Default parameter objects per layer; request params override them key by key.
    pub params: BTreeMap<String, Json>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub assets: AssetsConfig,
    pub output: OutputConfig,
    pub providers: ProvidersConfig,
    pub transitions: Option<TransitionWeights>,
    pub layout: StripLayout,
    pub layers: LayersConfig,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |reason: String| ConfigError::Parse {
            path: path.to_path_buf(),
            reason,
        };
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    /// File (if any) then process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    /// Applies `COMICWEAVE_*` overrides from `vars`; other names are ignored.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
        &mut self,
        vars: I,
    ) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "HOST" => self.server.host = value,
                "PORT" => {
                    self.server.port =
                        value
                            .parse()
                            .map_err(|e: std::num::ParseIntError| ConfigError::Env {
                                key,
                                reason: e.to_string(),
                            })?
                }
                "ASSET_ROOTS" => self.assets.roots = std::env::split_paths(&value).collect(),
                "OUTPUT_DIR" => self.output.dir = PathBuf::from(value),
                "SNAPSHOT" => self.server.snapshot = Some(PathBuf::from(value)),
                "IMAGE_ENDPOINT" => {
                    self.providers
                        .image
                        .get_or_insert_with(RemoteProviderConfig::default)
                        .endpoint = value
                }
                "SENTIMENT_ENDPOINT" => {
                    self.providers
                        .sentiment
                        .get_or_insert_with(|| SentimentConfig {
                            remote: RemoteProviderConfig::default(),
                            labels: None,
                        })
                        .remote
                        .endpoint = value
                }
                "EMBEDDING_ENDPOINT" => {
                    self.providers
                        .embedding
                        .get_or_insert_with(|| EmbeddingConfig {
                            remote: RemoteProviderConfig::default(),
                            dimension: None,
                        })
                        .remote
                        .endpoint = value
                }
                _ => tracing::debug!(key = key.as_str(), "ignoring unknown override"),
            }
        }
        Ok(())
    }

    /// Built-in models with any configured remote replacements swapped in.
    pub fn model_registry(&self) -> Result<ModelRegistry, ConfigError> {
        let provider_err = |name: &str| {
            let name = name.to_string();
            move |source| ConfigError::Provider { name, source }
        };
        let mut models = ModelRegistry::builtin();
        if let Some(c) = &self.providers.image {
            let p =
                RemoteImageProvider::new(c.clone()).map_err(provider_err(model_names::IMAGE))?;
            models.replace(model_names::IMAGE, ModelHandle::Image(Arc::new(p)));
        }
        if let Some(c) = &self.providers.sentiment {
            let p = RemoteSentimentProvider::new(c.remote.clone(), c.labels.clone())
                .map_err(provider_err(model_names::SENTIMENT))?;
            models.replace(model_names::SENTIMENT, ModelHandle::Sentiment(Arc::new(p)));
        }
        if let Some(c) = &self.providers.embedding {
            let p = RemoteEmbeddingProvider::new(c.remote.clone(), c.dimension)
                .map_err(provider_err(model_names::EMBEDDING))?;
            models.replace(model_names::EMBEDDING, ModelHandle::Embedding(Arc::new(p)));
        }
        Ok(models)
    }

    /// Built-in layers plus declarative ones from `layers.dir`.
    pub fn generator(&self) -> Result<Generator, ConfigError> {
        let mut layers = LayerRegistry::builtin();
        if let Some(dir) = &self.layers.dir {
            for layer in load_layer_dir(dir)? {
                let name = layer.name.clone();
                layers
                    .register(Box::new(layer))
                    .map_err(|e| ConfigError::Layer {
                        path: dir.join(format!("{name}.json")),
                        reason: e.to_string(),
                    })?;
            }
        }
        Ok(Generator::new(layers, self.model_registry()?))
    }

    /// Built-in visuals plus every configured asset root.
    pub fn asset_pool(&self) -> Result<AssetPool, ConfigError> {
        let mut pool = AssetPool::builtin();
        for root in &self.assets.roots {
            assets_io::load_asset_root(&mut pool, root)?;
        }
        Ok(pool)
    }

    /// Configured defaults overlaid with `request`, key by key per layer.
    pub fn layer_params(&self, request: &BTreeMap<String, Json>) -> BTreeMap<String, Json> {
        let mut out = self.layers.params.clone();
        if let Some(w) = &self.transitions {
            let entry = out
                .entry("transition".into())
                .or_insert_with(|| Json::Object(Default::default()));
            if let Json::Object(map) = entry {
                map.entry("weights")
                    .or_insert_with(|| serde_json::to_value(w).expect("weights serialize"));
            }
        }
        for (layer, params) in request {
            match (out.get_mut(layer), params) {
                (Some(Json::Object(base)), Json::Object(over)) => {
                    for (k, v) in over {
                        base.insert(k.clone(), v.clone());
                    }
                }
                _ => {
                    out.insert(layer.clone(), params.clone());
                }
            }
        }
        out
    }
}

/// Parses every `*.json` file in `dir` as a declarative layer, in name order.
pub fn load_layer_dir(dir: &Path) -> Result<Vec<DeclarativeLayer>, ConfigError> {
    let read_err = |source| ConfigError::Read {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(read_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            DeclarativeLayer::from_json(&text).map_err(|e| ConfigError::Layer {
                path,
                reason: e.to_string(),
            })
        })
        .collect()
}
