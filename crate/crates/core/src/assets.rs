//! Pool of visual sets.
//!
//! A visual set maps labels to images plus placement metadata. Semantic
//! nodes are resolved against the pool at render time; a missing label
//! resolves to a flagged placeholder instead of failing.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::art::{self, SYMBOL_CATEGORIES};
use crate::raster::{draw_glyph_text, Raster};
use crate::rng::{fnv1a, mix64};

pub const CHARACTERS: &str = "characters";
pub const SCENES: &str = "scenes";
pub const OBJECTS: &str = "objects";
pub const SYMBOLS: &str = "symbols";
pub const GENERATED: &str = "generated";

pub const SYMBOL_MAP_JSON: &str = include_str!("../data/symbol_map.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssetError {
    #[error("unknown visual set `{0}`")]
    UnknownSet(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("malformed asset data: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualEntry {
    pub image: Arc<Raster>,
    /// Point of the image placed at the node position, in image fractions.
    pub anchor: (f64, f64),
    pub scale: f64,
    /// File the entry was loaded from, if any.
    pub source: Option<String>,
}

impl VisualEntry {
    pub fn new(image: Raster) -> Self {
        VisualEntry {
            image: Arc::new(image),
            anchor: (0.5, 0.5),
            scale: 1.0,
            source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VisualSet {
    pub name: String,
    pub entries: BTreeMap<String, VisualEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub label: String,
    pub entry: VisualEntry,
    pub placeholder: bool,
}

/// On-disk set manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetManifest {
    pub name: String,
    pub entries: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    #[serde(default = "default_anchor")]
    pub anchor: (f64, f64),
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_anchor() -> (f64, f64) {
    (0.5, 0.5)
}

fn default_scale() -> f64 {
    1.0
}

/// Action or emotion label → symbol label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolMapping {
    entries: BTreeMap<String, String>,
}

impl SymbolMapping {
    /// Symbols must come from the built-in categories or `extensions`.
    pub fn new(entries: BTreeMap<String, String>, extensions: &[&str]) -> Result<Self, AssetError> {
        for symbol in entries.values() {
            if !SYMBOL_CATEGORIES.contains(&symbol.as_str())
                && !extensions.contains(&symbol.as_str())
            {
                return Err(AssetError::UnknownSymbol(symbol.clone()));
            }
        }
        Ok(SymbolMapping { entries })
    }

    pub fn from_json(text: &str, extensions: &[&str]) -> Result<Self, AssetError> {
        let entries =
            serde_json::from_str(text).map_err(|e| AssetError::Malformed(e.to_string()))?;
        Self::new(entries, extensions)
    }

    pub fn builtin() -> Self {
        Self::from_json(SYMBOL_MAP_JSON, &[]).expect("bundled symbol map is valid")
    }

    pub fn symbol_for(&self, action: &str) -> Option<&str> {
        self.entries.get(action).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Symbol for `action` under the built-in table.
pub fn symbol_for(action: &str) -> Option<String> {
    SymbolMapping::builtin()
        .symbol_for(action)
        .map(String::from)
}

/// Lowercases and replaces whitespace with underscores.
pub fn normalize_label(stem: &str) -> String {
    stem.trim()
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect::<String>()
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetPool {
    sets: BTreeMap<String, VisualSet>,
    symbols: SymbolMapping,
}

impl Default for AssetPool {
    fn default() -> Self {
        AssetPool {
            sets: BTreeMap::new(),
            symbols: SymbolMapping::builtin(),
        }
    }
}

impl AssetPool {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Pool with the procedural characters, scenes, objects and the eight
    /// default symbols.
    pub fn builtin() -> Self {
        let mut pool = Self::empty();
        for (set, items) in [
            (CHARACTERS, art::builtin_characters()),
            (SCENES, art::builtin_scenes()),
            (OBJECTS, art::builtin_objects()),
            (SYMBOLS, art::builtin_symbols()),
        ] {
            pool.ensure_set(set);
            for (label, image) in items {
                let mut entry = VisualEntry::new(image);
                if set == CHARACTERS || set == OBJECTS {
                    entry.anchor = (0.5, 1.0);
                }
                pool.insert(set, &label, entry);
            }
        }
        pool.ensure_set(GENERATED);
        pool
    }

    pub fn symbol_mapping(&self) -> &SymbolMapping {
        &self.symbols
    }

    pub fn set_symbol_mapping(&mut self, mapping: SymbolMapping) {
        self.symbols = mapping;
    }

    pub fn ensure_set(&mut self, name: &str) -> &mut VisualSet {
        self.sets
            .entry(name.to_string())
            .or_insert_with(|| VisualSet {
                name: name.to_string(),
                entries: BTreeMap::new(),
            })
    }

    /// Inserts or overwrites an entry; returns true when a label was replaced.
    pub fn insert(&mut self, set: &str, label: &str, entry: VisualEntry) -> bool {
        self.ensure_set(set)
            .entries
            .insert(label.to_string(), entry)
            .is_some()
    }

    pub fn set(&self, name: &str) -> Option<&VisualSet> {
        self.sets.get(name)
    }

    pub fn set_names(&self) -> Vec<String> {
        self.sets.keys().cloned().collect()
    }

    pub fn labels(&self, set: &str) -> Vec<String> {
        self.sets
            .get(set)
            .map(|s| s.entries.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn get(&self, set: &str, label: &str) -> Option<&VisualEntry> {
        self.sets.get(set)?.entries.get(label)
    }

    /// Entry for `label` in `set`, or a flagged placeholder when unmapped.
    pub fn resolve(&self, label: &str, set: &str) -> Result<Resolved, AssetError> {
        let visual_set = self
            .sets
            .get(set)
            .ok_or_else(|| AssetError::UnknownSet(set.to_string()))?;
        Ok(match visual_set.entries.get(label) {
            Some(entry) => Resolved {
                label: label.to_string(),
                entry: entry.clone(),
                placeholder: false,
            },
            None => Resolved {
                label: label.to_string(),
                entry: placeholder(label),
                placeholder: true,
            },
        })
    }

    /// Resolves a `set/label` reference; unknown sets also fall back to a
    /// placeholder so rendering never fails.
    pub fn resolve_ref(&self, reference: &str, default_set: &str) -> Resolved {
        let (set, label) = reference
            .split_once('/')
            .unwrap_or((default_set, reference));
        self.resolve(label, set).unwrap_or_else(|_| Resolved {
            label: label.to_string(),
            entry: placeholder(label),
            placeholder: true,
        })
    }

    /// Stable fingerprint of every entry's pixels and metadata.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0u64;
        for (set, vs) in &self.sets {
            for (label, e) in &vs.entries {
                h = mix64(h ^ fnv1a(set.as_bytes()));
                h = mix64(h ^ fnv1a(label.as_bytes()));
                h = mix64(h ^ e.image.content_hash());
                h = mix64(
                    h ^ e.anchor.0.to_bits()
                        ^ e.anchor.1.to_bits().rotate_left(21)
                        ^ e.scale.to_bits().rotate_left(42),
                );
            }
        }
        h
    }
}

/// Gray box with the missing label stamped as a glyph pattern.
pub fn placeholder(label: &str) -> VisualEntry {
    let mut img = Raster::new(64, 64, [150, 150, 150, 255]);
    img.fill_rect(0, 0, 64, 2, [90, 90, 90, 255]);
    img.fill_rect(0, 62, 64, 64, [90, 90, 90, 255]);
    img.fill_rect(0, 0, 2, 64, [90, 90, 90, 255]);
    img.fill_rect(62, 0, 64, 64, [90, 90, 90, 255]);
    let chars: Vec<char> = label.chars().collect();
    for (row, chunk) in chars.chunks(3).take(4).enumerate() {
        let line: String = chunk.iter().collect();
        draw_glyph_text(
            &mut img,
            6,
            6 + row as i64 * 14,
            &line,
            2,
            [40, 40, 40, 255],
        );
    }
    VisualEntry::new(img)
}
