//! Panel transitions.
//!
//! Each gap between consecutive panels gets one of five transition kinds,
//! and applying a kind rewrites the later panel: new actions, a new scene,
//! a viewport focused on an object, extra objects, or a scene-and-props
//! swap that keeps the cast.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{AssetPool, OBJECTS, SCENES};
use crate::grammar::VngCategory;
use crate::model::{props, AttributeNode, AttributeType, ModelError, NodeId, SequenceModel};
use crate::planner::ActionGraph;

/// Zoom used when an object transition focuses the viewport.
pub const FOCUS_ZOOM: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransitionType {
    Action,
    Scene,
    Object,
    Addition,
    Alternation,
}

impl TransitionType {
    pub const ALL: [TransitionType; 5] = [
        TransitionType::Action,
        TransitionType::Scene,
        TransitionType::Object,
        TransitionType::Addition,
        TransitionType::Alternation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransitionType::Action => "Action",
            TransitionType::Scene => "Scene",
            TransitionType::Object => "Object",
            TransitionType::Addition => "Addition",
            TransitionType::Alternation => "Alternation",
        }
    }
}

impl fmt::Display for TransitionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error("transition weights are all zero")]
    AllZeroWeights,
    #[error("transition weights must be finite and non-negative")]
    InvalidWeight,
    #[error("no alternative {0} available in the asset pool")]
    NoAlternativeAsset(&'static str),
    #[error("panel {0} not found")]
    UnknownPanel(NodeId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionWeights {
    pub action: f64,
    pub scene: f64,
    pub object: f64,
    pub addition: f64,
    pub alternation: f64,
}

impl Default for TransitionWeights {
    fn default() -> Self {
        TransitionWeights {
            action: 0.35,
            scene: 0.2,
            object: 0.15,
            addition: 0.15,
            alternation: 0.15,
        }
    }
}

impl TransitionWeights {
    pub fn only(kind: TransitionType) -> Self {
        let mut w = TransitionWeights {
            action: 0.0,
            scene: 0.0,
            object: 0.0,
            addition: 0.0,
            alternation: 0.0,
        };
        *w.weight_mut(kind) = 1.0;
        w
    }

    pub fn weight(&self, kind: TransitionType) -> f64 {
        match kind {
            TransitionType::Action => self.action,
            TransitionType::Scene => self.scene,
            TransitionType::Object => self.object,
            TransitionType::Addition => self.addition,
            TransitionType::Alternation => self.alternation,
        }
    }

    pub fn weight_mut(&mut self, kind: TransitionType) -> &mut f64 {
        match kind {
            TransitionType::Action => &mut self.action,
            TransitionType::Scene => &mut self.scene,
            TransitionType::Object => &mut self.object,
            TransitionType::Addition => &mut self.addition,
            TransitionType::Alternation => &mut self.alternation,
        }
    }

    fn validate(&self) -> Result<f64, TransitionError> {
        let mut total = 0.0;
        for kind in TransitionType::ALL {
            let w = self.weight(kind);
            if !w.is_finite() || w < 0.0 {
                return Err(TransitionError::InvalidWeight);
            }
            total += w;
        }
        if total == 0.0 {
            return Err(TransitionError::AllZeroWeights);
        }
        Ok(total)
    }
}

/// One transition per gap between consecutive panels.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionPlan {
    pub entries: Vec<TransitionType>,
}

/// Samples a transition for every gap. When `force_peak_action` is set,
/// the gap leading into a Peak panel is always an Action transition.
pub fn plan_transitions<R: Rng + ?Sized>(
    seq: &SequenceModel,
    rng: &mut R,
    weights: &TransitionWeights,
    force_peak_action: bool,
) -> Result<TransitionPlan, TransitionError> {
    let total = weights.validate()?;
    let panels = seq.panels();
    let mut entries = Vec::with_capacity(panels.len().saturating_sub(1));
    for next in panels.iter().skip(1) {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for kind in TransitionType::ALL {
            let w = weights.weight(kind);
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(kind);
            if u < acc {
                break;
            }
        }
        let mut kind = pick.expect("at least one positive weight");
        let is_peak = seq.node(*next).and_then(AttributeNode::phase) == Some(VngCategory::Peak);
        if force_peak_action && is_peak {
            kind = TransitionType::Action;
        }
        entries.push(kind);
    }
    Ok(TransitionPlan { entries })
}

fn pick<'a, R: Rng + ?Sized>(items: &'a [String], rng: &mut R) -> Option<&'a String> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

/// Visual label of a node: its asset reference if set, else its name.
fn label_of(node: &AttributeNode) -> &str {
    &node.name
}

fn scene_label(seq: &SequenceModel, panel: NodeId) -> Option<String> {
    seq.children_of(panel, &AttributeType::Scene)
        .first()
        .and_then(|s| seq.node(*s))
        .map(|n| label_of(n).to_string())
}

fn set_scene<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    prev: NodeId,
    next: NodeId,
    assets: &AssetPool,
    rng: &mut R,
) -> Result<(), TransitionError> {
    let avoid = scene_label(seq, prev);
    let current = scene_label(seq, next);
    let candidates: Vec<String> = assets
        .labels(SCENES)
        .into_iter()
        .filter(|l| Some(l) != avoid.as_ref() && Some(l) != current.as_ref())
        .collect();
    let label = pick(&candidates, rng)
        .ok_or(TransitionError::NoAlternativeAsset("scene"))?
        .clone();
    let scenes = seq.children_of(next, &AttributeType::Scene);
    match scenes.first() {
        Some(scene) => {
            seq.rename(*scene, &label)?;
            seq.set_property(*scene, props::IDENTITY, label.as_str())?;
            seq.remove_property(*scene, props::VISUAL)?;
        }
        None => {
            let node = AttributeNode::new(AttributeType::Scene, label.as_str())
                .with(props::IDENTITY, label.as_str());
            seq.add_attribute(next, node)?;
        }
    }
    Ok(())
}

fn random_object_position<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let x: f64 = rng.random_range(0.1..0.9);
    let y: f64 = rng.random_range(0.6..0.92);
    (
        libm::round(x * 1000.0) / 1000.0,
        libm::round(y * 1000.0) / 1000.0,
    )
}

fn add_object<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    panel: NodeId,
    assets: &AssetPool,
    rng: &mut R,
) -> Result<NodeId, TransitionError> {
    let labels = assets.labels(OBJECTS);
    let label = pick(&labels, rng)
        .ok_or(TransitionError::NoAlternativeAsset("object"))?
        .clone();
    let pos = random_object_position(rng);
    let node =
        AttributeNode::new(AttributeType::VisualRef, label.as_str()).with(props::POSITION, pos);
    Ok(seq.add_attribute(panel, node)?)
}

/// Viewport offset in [-1,1]^2 that centers `pos` at the given zoom, as far
/// as the panel borders allow.
pub fn focus_offset(pos: (f64, f64), zoom: f64) -> (f64, f64) {
    let half_span = 0.5 - 0.5 / zoom;
    if half_span <= 0.0 {
        return (0.0, 0.0);
    }
    let axis = |p: f64| ((p - 0.5) / half_span).clamp(-1.0, 1.0);
    (axis(pos.0), axis(pos.1))
}

/// Rewrites `next` according to `kind`. Only the `next` subtree changes.
pub fn apply_transition<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    prev: NodeId,
    next: NodeId,
    kind: TransitionType,
    assets: &AssetPool,
    graph: &ActionGraph,
    rng: &mut R,
) -> Result<(), TransitionError> {
    for p in [prev, next] {
        if seq.node(p).map(|n| &n.kind) != Some(&AttributeType::Panel) {
            return Err(TransitionError::UnknownPanel(p));
        }
    }
    match kind {
        TransitionType::Action => {
            let before = seq.characters_by_identity(prev);
            for (identity, node) in seq.characters_by_identity(next) {
                let prev_action = before
                    .get(&identity)
                    .and_then(|p| seq.node(*p))
                    .and_then(|n| n.text(props::ACTION))
                    .map(String::from);
                let Some(prev_action) = prev_action else {
                    continue;
                };
                let current = seq
                    .node(node)
                    .and_then(|n| n.text(props::ACTION))
                    .map(String::from);
                if current.as_deref().is_some_and(|c| c != prev_action) {
                    continue;
                }
                let options: Vec<String> = match graph.successors(&prev_action) {
                    Ok(succ) if !succ.is_empty() => succ.to_vec(),
                    _ => graph
                        .nodes()
                        .iter()
                        .filter(|n| **n != prev_action)
                        .cloned()
                        .collect(),
                };
                if let Some(choice) = pick(&options, rng) {
                    seq.set_property(node, props::ACTION, choice.as_str())?;
                }
            }
            seq.set_property(next, props::ACTION_CHANGE, true)?;
        }
        TransitionType::Scene => set_scene(seq, prev, next, assets, rng)?,
        TransitionType::Object => {
            let objects = seq.children_of(next, &AttributeType::VisualRef);
            let target = match pick_id(&objects, rng) {
                Some(id) => id,
                None => add_object(seq, next, assets, rng)?,
            };
            let pos = seq
                .node(target)
                .and_then(|n| n.pair(props::POSITION))
                .unwrap_or((0.5, 0.5));
            seq.set_property(next, props::ZOOM, FOCUS_ZOOM)?;
            seq.set_property(next, props::VIEWPORT_OFFSET, focus_offset(pos, FOCUS_ZOOM))?;
        }
        TransitionType::Addition => {
            add_object(seq, next, assets, rng)?;
        }
        TransitionType::Alternation => {
            set_scene(seq, prev, next, assets, rng)?;
            let objects = seq.children_of(next, &AttributeType::VisualRef);
            if objects.is_empty() {
                add_object(seq, next, assets, rng)?;
            }
            let labels = assets.labels(OBJECTS);
            for obj in objects {
                let current = seq.node(obj).map(|n| n.name.clone()).unwrap_or_default();
                let options: Vec<String> =
                    labels.iter().filter(|l| **l != current).cloned().collect();
                let label = pick(&options, rng)
                    .ok_or(TransitionError::NoAlternativeAsset("object"))?
                    .clone();
                seq.rename(obj, &label)?;
                seq.remove_property(obj, props::VISUAL)?;
                seq.set_property(obj, props::POSITION, random_object_position(rng))?;
            }
        }
    }
    seq.set_property(next, props::TRANSITION_IN, kind.as_str())?;
    Ok(())
}

fn pick_id<R: Rng + ?Sized>(ids: &[NodeId], rng: &mut R) -> Option<NodeId> {
    if ids.is_empty() {
        None
    } else {
        Some(ids[rng.random_range(0..ids.len())])
    }
}

/// Applies a plan gap by gap and stores it on the sequence.
pub fn apply_plan<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    plan: &TransitionPlan,
    assets: &AssetPool,
    graph: &ActionGraph,
    rng: &mut R,
) -> Result<(), TransitionError> {
    let panels = seq.panels().to_vec();
    for (gap, kind) in plan.entries.iter().enumerate() {
        apply_transition(seq, panels[gap], panels[gap + 1], *kind, assets, graph, rng)?;
    }
    seq.set_transitions(Some(plan.clone()));
    Ok(())
}
