//! HTTP clients for image, sentiment and embedding models.
//!
//! Wire format, all JSON over POST:
//!
//! | path        | request                         | response              |
//! |-------------|---------------------------------|-----------------------|
//! | `/generate` | `{prompt, base_png_b64?}`       | `{png_b64}`           |
//! | `/classify` | `{text}`                        | `{probs: {label: p}}` |
//! | `/embed`    | `{label}`                       | `{vector: [f64]}`     |
//!
//! Connection failures, timeouts and 5xx/429 answers are retried with
//! exponential backoff; any other status is a `BadResponse` at once.

use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use comicweave_core::providers::{
    EmbeddingProvider, ImageProvider, LexiconSentiment, ProviderError, SentimentProvider,
    TableEmbedding,
};
use comicweave_core::raster::Raster;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteProviderConfig {
    /// Base URL; request paths are appended to it.
    pub endpoint: String,
    pub timeout_secs: f64,
    /// Extra attempts after the first.
    pub retries: u32,
    /// Delay before the first retry; doubled for each later one.
    pub backoff_ms: u64,
}

impl Default for RemoteProviderConfig {
    fn default() -> Self {
        RemoteProviderConfig {
            endpoint: String::new(),
            timeout_secs: 30.0,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("endpoint must be an http:// or https:// URL, got `{0}`")]
    BadEndpoint(String),
    #[error("timeout must be positive")]
    BadTimeout,
}

impl RemoteProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteProviderConfig {
            endpoint: endpoint.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(ConfigError::BadEndpoint(self.endpoint.clone()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConfigError::BadTimeout);
        }
        Ok(())
    }
}

enum Attempt {
    Transient { timeout: bool, message: String },
    Fatal(ProviderError),
}

/// JSON-over-POST client with retry. Cheap to clone.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    config: RemoteProviderConfig,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(config: RemoteProviderConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteClient { config, agent })
    }

    pub fn config(&self) -> &RemoteProviderConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!(
            "{}/{}",
            self.config.endpoint.trim_end_matches('/'),
            path.trim_start_matches('/')
        )
    }

    fn attempt<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, Attempt> {
        match self.agent.post(url).send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    resp.body_mut()
                        .read_json::<R>()
                        .map_err(|e| Attempt::Fatal(ProviderError::BadResponse(e.to_string())))
                } else if status >= 500 || status == 429 {
                    Err(Attempt::Transient {
                        timeout: false,
                        message: format!("HTTP {status}"),
                    })
                } else {
                    Err(Attempt::Fatal(ProviderError::BadResponse(format!(
                        "HTTP {status}"
                    ))))
                }
            }
            Err(ureq::Error::Timeout(_)) => Err(Attempt::Transient {
                timeout: true,
                message: "timed out".into(),
            }),
            Err(ureq::Error::Json(e)) => {
                Err(Attempt::Fatal(ProviderError::BadResponse(e.to_string())))
            }
            Err(e) => Err(Attempt::Transient {
                timeout: false,
                message: e.to_string(),
            }),
        }
    }

    /// POSTs `body` to `path` and decodes the JSON answer.
    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, ProviderError> {
        let url = self.url(path);
        let attempts = self.config.retries.saturating_add(1);
        let mut last = String::new();
        let mut only_timeouts = true;
        for i in 0..attempts {
            if i > 0 {
                let delay = self
                    .config
                    .backoff_ms
                    .saturating_mul(1u64 << (i - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&url, body) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient { timeout, message }) => {
                    tracing::debug!(
                        url = url.as_str(),
                        attempt = i + 1,
                        error = message.as_str(),
                        "remote call failed"
                    );
                    only_timeouts &= timeout;
                    last = message;
                }
            }
        }
        if attempts == 1 && only_timeouts {
            Err(ProviderError::Timeout)
        } else {
            Err(ProviderError::ExhaustedRetries { attempts, last })
        }
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_png_b64: Option<String>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    png_b64: String,
}

#[derive(Debug, Clone)]
pub struct RemoteImageProvider {
    client: RemoteClient,
}

impl RemoteImageProvider {
    pub fn new(config: RemoteProviderConfig) -> Result<Self, ConfigError> {
        Ok(RemoteImageProvider {
            client: RemoteClient::new(config)?,
        })
    }
}

/// Equivalent of [`RemoteImageProvider::generate`] without keeping a client.
pub fn remote_generate(
    config: &RemoteProviderConfig,
    prompt: &str,
    base: Option<&Raster>,
) -> Result<Raster, ProviderError> {
    RemoteImageProvider::new(config.clone())
        .map_err(|e| ProviderError::Failed(e.to_string()))?
        .generate(prompt, base)
}

impl ImageProvider for RemoteImageProvider {
    fn generate(&self, prompt: &str, base: Option<&Raster>) -> Result<Raster, ProviderError> {
        let base_png_b64 = base
            .map(|b| codec::encode_png(b).map(|bytes| B64.encode(bytes)))
            .transpose()
            .map_err(|e| ProviderError::Failed(e.to_string()))?;
        let resp: GenerateResponse = self.client.post(
            "/generate",
            &GenerateRequest {
                prompt,
                base_png_b64,
            },
        )?;
        let bytes = B64
            .decode(resp.png_b64.as_bytes())
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        codec::decode_image(&bytes).map_err(|e| ProviderError::BadResponse(e.to_string()))
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    probs: BTreeMap<String, f64>,
}

/// Remote classifier over a declared label set. Answers are renormalized;
/// labels outside the declared set are rejected.
#[derive(Debug, Clone)]
pub struct RemoteSentimentProvider {
    client: RemoteClient,
    labels: Vec<String>,
}

impl RemoteSentimentProvider {
    /// `labels` defaults to the bundled lexicon's label set.
    pub fn new(
        config: RemoteProviderConfig,
        labels: Option<Vec<String>>,
    ) -> Result<Self, ConfigError> {
        let labels = labels.unwrap_or_else(|| LexiconSentiment::builtin().labels());
        Ok(RemoteSentimentProvider {
            client: RemoteClient::new(config)?,
            labels,
        })
    }
}

impl SentimentProvider for RemoteSentimentProvider {
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn classify(&self, text: &str) -> Result<BTreeMap<String, f64>, ProviderError> {
        let resp: ClassifyResponse = self.client.post("/classify", &ClassifyRequest { text })?;
        let mut probs = resp.probs;
        if let Some(bad) = probs.keys().find(|k| !self.labels.contains(k)) {
            return Err(ProviderError::UnknownLabel(bad.clone()));
        }
        if probs.values().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ProviderError::BadResponse(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.values().sum();
        if total <= 0.0 {
            return Err(ProviderError::BadResponse(
                "probabilities sum to zero".into(),
            ));
        }
        for label in &self.labels {
            probs.entry(label.clone()).or_insert(0.0);
        }
        probs.values_mut().for_each(|p| *p /= total);
        Ok(probs)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    label: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteEmbeddingProvider {
    client: RemoteClient,
    dimension: usize,
}

impl RemoteEmbeddingProvider {
    /// `dimension` defaults to the bundled table's.
    pub fn new(
        config: RemoteProviderConfig,
        dimension: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let dimension = dimension.unwrap_or_else(|| TableEmbedding::builtin().dimension());
        Ok(RemoteEmbeddingProvider {
            client: RemoteClient::new(config)?,
            dimension,
        })
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, label: &str) -> Result<Vec<f64>, ProviderError> {
        let resp: EmbedResponse = self.client.post("/embed", &EmbedRequest { label })?;
        if resp.vector.len() != self.dimension || resp.vector.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::BadResponse(format!(
                "expected {} finite components, got {}",
                self.dimension,
                resp.vector.len()
            )));
        }
        Ok(resp.vector)
    }
}
