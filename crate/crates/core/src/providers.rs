//! Model provider contracts and the offline implementations bundled with
//! the generator.
//!
//! Real deployments can swap any of these for a remote model behind the
//! same trait; the stubs here are deterministic so whole pipelines can be
//! replayed without a network.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Deserialize;
use thiserror::Error;

use crate::raster::{draw_glyph_text, Raster, Rgba};
use crate::rng::{fnv1a, mix64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("label `{0}` is not known to this provider")]
    UnknownLabel(String),
    #[error("request timed out")]
    Timeout,
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries { attempts: u32, last: String },
    #[error("provider failed: {0}")]
    Failed(String),
}

pub trait SentimentProvider: Send + Sync {
    /// The fixed label set this provider emits.
    fn labels(&self) -> Vec<String>;

    /// Probability per label; non-negative, summing to one.
    fn classify(&self, text: &str) -> Result<BTreeMap<String, f64>, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Same label, same vector.
    fn embed(&self, label: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait ImageProvider: Send + Sync {
    fn generate(&self, prompt: &str, base: Option<&Raster>) -> Result<Raster, ProviderError>;
}

pub const LEXICON_JSON: &str = include_str!("../data/lexicon.json");
pub const EMBEDDINGS_JSON: &str = include_str!("../data/embeddings.json");

#[derive(Debug, Clone, Deserialize)]
struct LexiconFile {
    neutral_label: String,
    smoothing: f64,
    keywords: BTreeMap<String, Vec<String>>,
}

/// Keyword-lexicon sentiment classifier over the GoEmotions label set.
///
/// Each token that appears in a label's keyword list adds one to that
/// label; the neutral label always gets a small smoothing mass so empty
/// or unmatched text still yields a distribution.
#[derive(Debug, Clone)]
pub struct LexiconSentiment {
    neutral: String,
    smoothing: f64,
    keywords: BTreeMap<String, Vec<String>>,
}

impl LexiconSentiment {
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let file: LexiconFile =
            serde_json::from_str(text).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        if !file.keywords.contains_key(&file.neutral_label) {
            return Err(ProviderError::UnknownLabel(file.neutral_label));
        }
        if file.smoothing.is_nan() || file.smoothing <= 0.0 {
            return Err(ProviderError::BadResponse(
                "smoothing must be positive".into(),
            ));
        }
        Ok(LexiconSentiment {
            neutral: file.neutral_label,
            smoothing: file.smoothing,
            keywords: file.keywords,
        })
    }

    pub fn builtin() -> Self {
        Self::from_json(LEXICON_JSON).expect("bundled lexicon is valid")
    }
}

impl SentimentProvider for LexiconSentiment {
    fn labels(&self) -> Vec<String> {
        self.keywords.keys().cloned().collect()
    }

    fn classify(&self, text: &str) -> Result<BTreeMap<String, f64>, ProviderError> {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let mut weights: BTreeMap<String, f64> = self
            .keywords
            .iter()
            .map(|(label, words)| {
                let hits = tokens
                    .iter()
                    .filter(|t| words.iter().any(|w| w == *t))
                    .count();
                (label.clone(), hits as f64)
            })
            .collect();
        *weights.get_mut(&self.neutral).expect("checked at load") += self.smoothing;
        let total: f64 = weights.values().sum();
        for w in weights.values_mut() {
            *w /= total;
        }
        Ok(weights)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct EmbeddingFile {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

/// Embedding lookup from a bundled label → vector table.
#[derive(Debug, Clone)]
pub struct TableEmbedding {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl TableEmbedding {
    pub fn new(
        dimension: usize,
        vectors: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, ProviderError> {
        if let Some((label, _)) = vectors.iter().find(|(_, v)| v.len() != dimension) {
            return Err(ProviderError::BadResponse(alloc::format!(
                "vector for `{label}` does not have dimension {dimension}"
            )));
        }
        Ok(TableEmbedding { dimension, vectors })
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let file: EmbeddingFile =
            serde_json::from_str(text).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        Self::new(file.dimension, file.vectors)
    }

    pub fn builtin() -> Self {
        Self::from_json(EMBEDDINGS_JSON).expect("bundled embeddings are valid")
    }
}

impl EmbeddingProvider for TableEmbedding {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, label: &str) -> Result<Vec<f64>, ProviderError> {
        self.vectors
            .get(label)
            .cloned()
            .ok_or_else(|| ProviderError::UnknownLabel(label.to_string()))
    }
}

/// Offline stand-in for a text-to-image model: a hash-seeded color field
/// with the prompt stamped on it. When a base image is given its size and
/// alpha mask are kept and its colors are mixed in.
#[derive(Debug, Clone, Copy)]
pub struct StubImageProvider {
    pub size: u32,
}

impl Default for StubImageProvider {
    fn default() -> Self {
        StubImageProvider { size: 128 }
    }
}

pub fn stub_generate(prompt: &str, base: Option<&Raster>, default_size: u32) -> Raster {
    let base_hash = base.map_or(0, Raster::content_hash);
    let seed = mix64(fnv1a(prompt.as_bytes()) ^ mix64(base_hash));
    let (w, h) = base.map_or((default_size, default_size), |b| (b.width(), b.height()));
    let color = |s: u64| -> Rgba { [(s >> 8) as u8, (s >> 24) as u8, (s >> 40) as u8, 255] };
    let c0 = color(mix64(seed));
    let c1 = color(mix64(seed ^ 0x5555));
    let mut out = Raster::new(w, h, c0);
    let denom = (w + h).max(1) as f64;
    for y in 0..h {
        for x in 0..w {
            let t = (x + y) as f64 / denom;
            let mut px = [0u8; 4];
            for c in 0..3 {
                px[c] = libm::round(f64::from(c0[c]) * (1.0 - t) + f64::from(c1[c]) * t) as u8;
            }
            px[3] = 255;
            out.put(x, y, px);
        }
    }
    let cell = i64::from((w.min(h) / 40).max(1));
    let ink = color(mix64(seed ^ 0xaaaa)).map(|v| v ^ 0x80);
    let ink = [ink[0], ink[1], ink[2], 255];
    let per_line = ((i64::from(w) - 2 * cell) / (4 * cell)).max(1) as usize;
    let chars: Vec<char> = prompt.chars().collect();
    for (row, chunk) in chars.chunks(per_line).enumerate() {
        let line: String = chunk.iter().collect();
        draw_glyph_text(
            &mut out,
            cell,
            cell + row as i64 * 6 * cell,
            &line,
            cell,
            ink,
        );
    }
    if let Some(base) = base {
        for y in 0..h {
            for x in 0..w {
                let b = base.get(x, y);
                let o = out.get(x, y);
                let mix = |i: usize| ((u16::from(o[i]) + u16::from(b[i])) / 2) as u8;
                out.put(x, y, [mix(0), mix(1), mix(2), b[3]]);
            }
        }
    }
    out
}

impl ImageProvider for StubImageProvider {
    fn generate(&self, prompt: &str, base: Option<&Raster>) -> Result<Raster, ProviderError> {
        Ok(stub_generate(prompt, base, self.size))
    }
}
