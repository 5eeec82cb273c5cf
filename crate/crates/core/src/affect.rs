//! Arousal scoring.
//!
//! Sentiment labels are placed on the arousal axis by embedding them next
//! to a small set of emotion anchors whose arousal class is known (high,
//! medium, low map to 1, 0, -1). Each label keeps only its two nearest
//! anchors, mixes their values by distance, and the resulting scores are
//! min-max normalized onto [-1, 1]. An action's arousal is then the
//! expectation of that table under a sentiment classifier's output.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{EmbeddingProvider, ProviderError, SentimentProvider};

pub const ANCHORS_JSON: &str = include_str!("../data/anchors.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffectError {
    #[error("embedding for `{label}` has dimension {got}, expected {expected}")]
    DimensionMismatch {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("sentiment label `{0}` missing from the arousal table")]
    UnknownLabel(String),
    #[error("need at least {0}")]
    TooFew(&'static str),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: &'static str },
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArousalClass {
    High,
    Medium,
    Low,
}

impl ArousalClass {
    pub fn value(self) -> f64 {
        match self {
            ArousalClass::High => 1.0,
            ArousalClass::Medium => 0.0,
            ArousalClass::Low => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionAnchor {
    pub label: String,
    pub arousal_class: ArousalClass,
}

impl EmotionAnchor {
    pub fn new(label: &str, arousal_class: ArousalClass) -> Self {
        EmotionAnchor {
            label: label.to_string(),
            arousal_class,
        }
    }

    pub fn value(&self) -> f64 {
        self.arousal_class.value()
    }
}

pub fn anchors_from_json(text: &str) -> Result<Vec<EmotionAnchor>, AffectError> {
    serde_json::from_str(text).map_err(|e| AffectError::Malformed(e.to_string()))
}

/// The twelve circumplex anchors, four per arousal class.
pub fn builtin_anchors() -> Vec<EmotionAnchor> {
    anchors_from_json(ANCHORS_JSON).expect("bundled anchors are valid")
}

/// How the two retained anchor distances weight the anchor values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// The nearer anchor gets the larger weight.
    #[default]
    Inverse,
    /// Each anchor is weighted by its own distance share.
    Literal,
}

/// Euclidean distance from every sentiment label to every anchor.
pub fn distance_matrix(
    labels: &[String],
    anchors: &[EmotionAnchor],
    embed: &dyn EmbeddingProvider,
) -> Result<Vec<Vec<f64>>, AffectError> {
    if labels.is_empty() {
        return Err(AffectError::TooFew("one sentiment label"));
    }
    if anchors.len() < 2 {
        return Err(AffectError::TooFew("two emotion anchors"));
    }
    let dim = embed.dimension();
    let fetch = |label: &str| -> Result<Vec<f64>, AffectError> {
        let v = embed.embed(label)?;
        if v.len() != dim {
            return Err(AffectError::DimensionMismatch {
                label: label.to_string(),
                expected: dim,
                got: v.len(),
            });
        }
        Ok(v)
    };
    let anchor_vecs = anchors
        .iter()
        .map(|a| fetch(&a.label))
        .collect::<Result<Vec<_>, _>>()?;
    labels
        .iter()
        .map(|label| {
            let v = fetch(label)?;
            Ok(anchor_vecs
                .iter()
                .map(|a| libm::sqrt(v.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum()))
                .collect())
        })
        .collect()
}

/// Keeps the two smallest distances of a row; every other entry becomes
/// `None` and carries no weight. Ties go to the lower index.
pub fn mask_two_nearest(row: &[f64]) -> Vec<Option<f64>> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let mut out = alloc::vec![None; row.len()];
    for &i in order.iter().take(2) {
        out[i] = Some(row[i]);
    }
    out
}

/// Mixes the two retained anchor values of each row.
///
/// With retained distances `d1, d2` (in index order) at anchor values
/// `v1, v2`: inverse mode gives `(d2*v1 + d1*v2) / (d1 + d2)`, literal mode
/// `(d1*v1 + d2*v2) / (d1 + d2)`. Coincident anchors (`d1 + d2 == 0`) give
/// `v1`.
pub fn arousal_scores(
    masked: &[Vec<Option<f64>>],
    anchors: &[EmotionAnchor],
    mode: WeightMode,
) -> Result<Vec<f64>, AffectError> {
    masked
        .iter()
        .enumerate()
        .map(|(row_idx, row)| {
            if row.len() != anchors.len() {
                return Err(AffectError::MalformedRow {
                    row: row_idx,
                    reason: "width differs from anchor count",
                });
            }
            let kept: Vec<(f64, f64)> = row
                .iter()
                .zip(anchors)
                .filter_map(|(d, a)| d.map(|d| (d, a.value())))
                .collect();
            let [(d1, v1), (d2, v2)] = kept[..] else {
                return Err(AffectError::MalformedRow {
                    row: row_idx,
                    reason: "expected exactly two retained entries",
                });
            };
            let total = d1 + d2;
            if total == 0.0 {
                return Ok(v1);
            }
            Ok(match mode {
                WeightMode::Inverse => (d2 * v1 + d1 * v2) / total,
                WeightMode::Literal => (d1 * v1 + d2 * v2) / total,
            })
        })
        .collect()
}

/// Affine min-max map onto [-1, 1]; a constant vector maps to zeros.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || hi <= lo {
        return alloc::vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|r| (2.0 * (r - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
        .collect()
}

/// Sentiment label → arousal score in [-1, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArousalTable {
    entries: BTreeMap<String, f64>,
}

impl ArousalTable {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, AffectError> {
        if let Some((label, _)) = entries.iter().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
            return Err(AffectError::Malformed(alloc::format!(
                "score for `{label}` outside [-1,1]"
            )));
        }
        Ok(ArousalTable { entries })
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.get(label).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs the full pipeline: distances, two-nearest mask, weighting,
    /// normalization over the whole label set.
    pub fn build(
        labels: &[String],
        anchors: &[EmotionAnchor],
        embed: &dyn EmbeddingProvider,
        mode: WeightMode,
    ) -> Result<Self, AffectError> {
        let dist = distance_matrix(labels, anchors, embed)?;
        let masked: Vec<_> = dist.iter().map(|row| mask_two_nearest(row)).collect();
        let raw = arousal_scores(&masked, anchors, mode)?;
        let scores = normalize_scores(&raw);
        Self::new(labels.iter().cloned().zip(scores).collect())
    }
}

/// Expected arousal of `text` under the classifier's label distribution.
pub fn action_arousal(
    text: &str,
    sentiment: &dyn SentimentProvider,
    table: &ArousalTable,
) -> Result<f64, AffectError> {
    let probs = sentiment.classify(text)?;
    let mut score = 0.0;
    for (label, p) in &probs {
        let s = table
            .get(label)
            .ok_or_else(|| AffectError::UnknownLabel(label.clone()))?;
        score += p * s;
    }
    Ok(score.clamp(-1.0, 1.0))
}
