//! Visual narrative grammar.
//!
//! Panels are assigned one of five categories (Establisher, Initial,
//! Prolongation, Peak, Release). A phase follows the template
//! `(E) I (L) P (R)`; larger structures come from center-embedding, where
//! an I or P leaf is replaced by a whole phase. The flattened leaf order is
//! the panel order, and each category maps to a tension score.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{props, SequenceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VngCategory {
    #[serde(rename = "E")]
    Establisher,
    #[serde(rename = "I")]
    Initial,
    #[serde(rename = "L")]
    Prolongation,
    #[serde(rename = "P")]
    Peak,
    #[serde(rename = "R")]
    Release,
}

impl VngCategory {
    pub const ALL: [VngCategory; 5] = [
        VngCategory::Establisher,
        VngCategory::Initial,
        VngCategory::Prolongation,
        VngCategory::Peak,
        VngCategory::Release,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            VngCategory::Establisher => "E",
            VngCategory::Initial => "I",
            VngCategory::Prolongation => "L",
            VngCategory::Peak => "P",
            VngCategory::Release => "R",
        }
    }

    /// Importance rank, higher is more important: P > I > R > E > L.
    pub fn importance(self) -> u8 {
        match self {
            VngCategory::Peak => 5,
            VngCategory::Initial => 4,
            VngCategory::Release => 3,
            VngCategory::Establisher => 2,
            VngCategory::Prolongation => 1,
        }
    }

    /// Slot index inside the phase template.
    fn slot(self) -> usize {
        match self {
            VngCategory::Establisher => 0,
            VngCategory::Initial => 1,
            VngCategory::Prolongation => 2,
            VngCategory::Peak => 3,
            VngCategory::Release => 4,
        }
    }

    fn is_required(self) -> bool {
        matches!(self, VngCategory::Initial | VngCategory::Peak)
    }

    /// Categories a leaf may be center-embedded from.
    pub fn is_expandable(self) -> bool {
        matches!(self, VngCategory::Initial | VngCategory::Peak)
    }
}

impl fmt::Display for VngCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for VngCategory {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" => Ok(VngCategory::Establisher),
            "I" => Ok(VngCategory::Initial),
            "L" => Ok(VngCategory::Prolongation),
            "P" => Ok(VngCategory::Peak),
            "R" => Ok(VngCategory::Release),
            other => Err(GrammarError::UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("unknown grammar category `{0}`")]
    UnknownCategory(String),
    #[error("expansion probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("phase violates (E) I (L) P (R): {0}")]
    InvalidPhase(String),
    #[error("tension score {0} outside [0,10]")]
    TensionOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseTree {
    Leaf(VngCategory),
    Phase {
        /// The category slot this phase occupies in its parent; `None` at the root.
        replaces: Option<VngCategory>,
        children: Vec<PhaseTree>,
    },
}

impl PhaseTree {
    /// In-order leaf traversal.
    pub fn flatten(&self) -> Vec<VngCategory> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<VngCategory>) {
        match self {
            PhaseTree::Leaf(c) => out.push(*c),
            PhaseTree::Phase { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Category whose slot this subtree fills in its parent phase.
    fn slot_category(&self) -> Option<VngCategory> {
        match self {
            PhaseTree::Leaf(c) => Some(*c),
            PhaseTree::Phase { replaces, .. } => *replaces,
        }
    }

    /// Structural check of every phase against the template.
    pub fn validate(&self) -> Result<(), GrammarError> {
        match self {
            PhaseTree::Leaf(_) => Err(GrammarError::InvalidPhase(
                "a bare leaf is not a phase".into(),
            )),
            PhaseTree::Phase { children, .. } => {
                let mut last_slot: Option<usize> = None;
                let mut seen = [false; 5];
                for child in children {
                    let cat = child.slot_category().ok_or_else(|| {
                        GrammarError::InvalidPhase("embedded phase without a slot".into())
                    })?;
                    let slot = cat.slot();
                    if last_slot.is_some_and(|l| slot <= l) {
                        return Err(GrammarError::InvalidPhase(alloc::format!(
                            "{cat} out of template order"
                        )));
                    }
                    last_slot = Some(slot);
                    seen[slot] = true;
                    if let PhaseTree::Phase { .. } = child {
                        child.validate()?;
                    }
                }
                for cat in VngCategory::ALL {
                    if cat.is_required() && !seen[cat.slot()] {
                        return Err(GrammarError::InvalidPhase(alloc::format!("missing {cat}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Depth of the deepest embedded phase (0 for a basic phase).
    pub fn embedding_depth(&self) -> usize {
        match self {
            PhaseTree::Leaf(_) => 0,
            PhaseTree::Phase { children, .. } => children
                .iter()
                .map(|c| match c {
                    PhaseTree::Leaf(_) => 0,
                    p => 1 + p.embedding_depth(),
                })
                .max()
                .unwrap_or(0),
        }
    }
}

/// A single phase with I and P plus whichever optional categories are selected.
pub fn basic_phase(include_e: bool, include_l: bool, include_r: bool) -> PhaseTree {
    phase_with(None, include_e, include_l, include_r)
}

fn phase_with(replaces: Option<VngCategory>, e: bool, l: bool, r: bool) -> PhaseTree {
    let mut children = Vec::with_capacity(5);
    if e {
        children.push(PhaseTree::Leaf(VngCategory::Establisher));
    }
    children.push(PhaseTree::Leaf(VngCategory::Initial));
    if l {
        children.push(PhaseTree::Leaf(VngCategory::Prolongation));
    }
    children.push(PhaseTree::Leaf(VngCategory::Peak));
    if r {
        children.push(PhaseTree::Leaf(VngCategory::Release));
    }
    PhaseTree::Phase { replaces, children }
}

/// Center-embedding expansion. Each I or P leaf enclosed by fewer than
/// `max_depth` embedded phases is replaced, with probability `p_expand`,
/// by a new phase whose optional categories are each kept with probability
/// one half. New phases are themselves expanded under the same rule.
pub fn expand_center_embedded<R: Rng + ?Sized>(
    tree: &PhaseTree,
    rng: &mut R,
    p_expand: f64,
    max_depth: usize,
) -> Result<PhaseTree, GrammarError> {
    if !(0.0..=1.0).contains(&p_expand) {
        return Err(GrammarError::InvalidProbability(p_expand));
    }
    Ok(expand_node(tree, rng, p_expand, max_depth, 0))
}

fn expand_node<R: Rng + ?Sized>(
    tree: &PhaseTree,
    rng: &mut R,
    p: f64,
    max_depth: usize,
    depth: usize,
) -> PhaseTree {
    match tree {
        PhaseTree::Leaf(cat) => {
            if cat.is_expandable() && depth < max_depth && rng.random_bool(p) {
                let embedded = phase_with(
                    Some(*cat),
                    rng.random_bool(0.5),
                    rng.random_bool(0.5),
                    rng.random_bool(0.5),
                );
                expand_node(&embedded, rng, p, max_depth, depth + 1)
            } else {
                PhaseTree::Leaf(*cat)
            }
        }
        PhaseTree::Phase { replaces, children } => PhaseTree::Phase {
            replaces: *replaces,
            children: children
                .iter()
                .map(|c| match c {
                    PhaseTree::Leaf(_) => expand_node(c, rng, p, max_depth, depth),
                    PhaseTree::Phase { .. } => expand_node(c, rng, p, max_depth, depth + 1),
                })
                .collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeStructure {
    pub tree: PhaseTree,
    pub flat: Vec<VngCategory>,
}

impl NarrativeStructure {
    pub fn new(tree: PhaseTree) -> Self {
        let flat = tree.flatten();
        NarrativeStructure { tree, flat }
    }

    /// The unexpanded root phase, E-I-L-P-R.
    pub fn basic() -> Self {
        Self::new(basic_phase(true, true, true))
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

/// Resizes the sequence to the structure and tags panel k with `flat[k]`.
pub fn assign_structure(seq: &mut SequenceModel, structure: &NarrativeStructure) {
    seq.pad_or_trim(structure.len());
    let panels = seq.panels().to_vec();
    for (panel, cat) in panels.into_iter().zip(&structure.flat) {
        seq.set_property(panel, props::GRAMMAR_PHASE, cat.letter())
            .expect("category letters are valid phases");
    }
    seq.set_structure(Some(structure.clone()));
}

/// Category to tension score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcMapping {
    #[serde(rename = "E")]
    pub establisher: f64,
    #[serde(rename = "I")]
    pub initial: f64,
    #[serde(rename = "L")]
    pub prolongation: f64,
    #[serde(rename = "P")]
    pub peak: f64,
    #[serde(rename = "R")]
    pub release: f64,
}

impl Default for ArcMapping {
    fn default() -> Self {
        ArcMapping {
            establisher: 0.0,
            initial: 2.0,
            prolongation: 4.0,
            peak: 6.0,
            release: 2.0,
        }
    }
}

impl ArcMapping {
    pub fn score(&self, cat: VngCategory) -> f64 {
        match cat {
            VngCategory::Establisher => self.establisher,
            VngCategory::Initial => self.initial,
            VngCategory::Prolongation => self.prolongation,
            VngCategory::Peak => self.peak,
            VngCategory::Release => self.release,
        }
    }

    fn validate(&self) -> Result<(), GrammarError> {
        for cat in VngCategory::ALL {
            let s = self.score(cat);
            if !(0.0..=10.0).contains(&s) {
                return Err(GrammarError::TensionOutOfRange(s));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionCurve {
    pub scores: Vec<f64>,
}

impl TensionCurve {
    pub fn new(scores: Vec<f64>) -> Result<Self, GrammarError> {
        if let Some(bad) = scores.iter().find(|s| !(0.0..=10.0).contains(*s)) {
            return Err(GrammarError::TensionOutOfRange(*bad));
        }
        Ok(TensionCurve { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    /// Reads the tension already written on the panels, if every panel has one.
    pub fn from_sequence(seq: &SequenceModel) -> Option<Self> {
        let scores: Option<Vec<f64>> = seq
            .panels()
            .iter()
            .map(|p| seq.node(*p).and_then(|n| n.number(props::TENSION)))
            .collect();
        scores.map(|scores| TensionCurve { scores })
    }
}

/// Arc used when panels carry no grammar phases: piecewise linear through
/// 0 at the first panel, 6 at panel ceil(2n/3) and 2 at the last panel,
/// rounded to the nearest integer. For n <= 2 the peak lands on the last
/// panel and wins over the closing value.
pub fn default_arc(n: usize) -> Vec<f64> {
    const START: f64 = 0.0;
    const PEAK: f64 = 6.0;
    const END: f64 = 2.0;
    if n == 0 {
        return Vec::new();
    }
    let peak = (2 * n).div_ceil(3) - 1;
    let last = n - 1;
    (0..n)
        .map(|i| {
            let v = if i <= peak {
                if peak == 0 {
                    START
                } else {
                    START + (PEAK - START) * i as f64 / peak as f64
                }
            } else {
                PEAK + (END - PEAK) * (i - peak) as f64 / (last - peak) as f64
            };
            libm::round(v)
        })
        .collect()
}

/// Computes the tension arc and writes it onto each panel's `tension`.
pub fn narrative_arc(
    seq: &mut SequenceModel,
    mapping: &ArcMapping,
) -> Result<TensionCurve, GrammarError> {
    mapping.validate()?;
    let panels = seq.panels().to_vec();
    let phases: Option<Vec<VngCategory>> = panels
        .iter()
        .map(|p| seq.node(*p).and_then(|n| n.phase()))
        .collect();
    let scores = match phases {
        Some(phases) => phases.into_iter().map(|c| mapping.score(c)).collect(),
        None => default_arc(panels.len()),
    };
    let curve = TensionCurve::new(scores)?;
    for (panel, score) in panels.iter().zip(&curve.scores) {
        seq.set_property(*panel, props::TENSION, *score)
            .expect("validated tension range");
    }
    Ok(curve)
}
