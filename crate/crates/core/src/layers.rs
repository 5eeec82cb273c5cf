//! Built-in editing layers and declarative user layers.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affect::{builtin_anchors, ArousalTable, WeightMode};
use crate::assets::{AssetPool, VisualEntry, CHARACTERS, GENERATED, SCENES, SYMBOLS};
use crate::engine::{model_names, Layer, LayerContext, LayerError};
use crate::grammar::{
    assign_structure, basic_phase, default_arc, expand_center_embedded, narrative_arc, ArcMapping,
    NarrativeStructure, TensionCurve, VngCategory,
};
use crate::model::{props, AttributeNode, AttributeType, NodeId, SequenceModel, Value};
use crate::planner::{
    plan_actions, revise_consistency, ActionGraph, ActionManifest, ActionScoreTable,
    SelectionParams,
};
use crate::rng::{fnv1a, mix64};
use crate::transitions::{apply_plan, plan_transitions, TransitionWeights};

/// Default ordering of the built-in layers.
pub const CANONICAL_ORDER: [&str; 6] =
    ["grammar", "arc", "action", "transition", "symbol", "redraw"];

/// Symbol placement relative to its owner, in units of [`SYMBOL_REACH`].
pub const DEFAULT_SYMBOL_OFFSET: (f64, f64) = (0.5, -0.9);
/// Panel fraction spanned by a unit symbol offset.
pub const SYMBOL_REACH: f64 = 0.3;

pub fn builtin_layers() -> Vec<Box<dyn Layer>> {
    alloc::vec![
        Box::new(GrammarLayer),
        Box::new(ArcLayer),
        Box::new(ActionLayer),
        Box::new(TransitionLayer),
        Box::new(SymbolLayer),
        Box::new(RedrawLayer),
    ]
}

fn model_err(e: crate::model::ModelError) -> LayerError {
    LayerError::failed(e)
}

/// Tags panels with grammar phases.
///
/// Params: `p_expand` (0.3), `max_depth` (2), `fit_length` (true). With
/// `fit_length` the layer resamples until the flattened structure has as
/// many panels as the sequence, falling back to the closest candidate.
pub struct GrammarLayer;

const GRAMMAR_ATTEMPTS: usize = 256;

impl Layer for GrammarLayer {
    fn name(&self) -> &str {
        "grammar"
    }

    fn description(&self) -> &str {
        "assign narrative grammar phases to panels"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let p_expand = ctx.f64_param("p_expand", 0.3)?;
        let max_depth = ctx.usize_param("max_depth", 2)?;
        let fit = ctx.bool_param("fit_length", true)?;
        let n = seq.len();
        if fit && n < 2 {
            return Ok(());
        }
        let mut best: Option<NarrativeStructure> = None;
        let attempts = if fit { GRAMMAR_ATTEMPTS } else { 1 };
        for _ in 0..attempts {
            let root = if !fit || n >= 5 {
                basic_phase(true, true, true)
            } else {
                basic_phase(
                    ctx.rng.random_bool(0.5),
                    ctx.rng.random_bool(0.5),
                    ctx.rng.random_bool(0.5),
                )
            };
            let tree = expand_center_embedded(&root, &mut ctx.rng, p_expand, max_depth)
                .map_err(LayerError::failed)?;
            let candidate = NarrativeStructure::new(tree);
            let closer = best
                .as_ref()
                .is_none_or(|b| candidate.len().abs_diff(n) < b.len().abs_diff(n));
            if closer {
                best = Some(candidate);
            }
            if best.as_ref().is_some_and(|b| b.len() == n) {
                break;
            }
        }
        let structure = best.expect("at least one attempt");
        assign_structure(seq, &structure);
        Ok(())
    }
}

/// Writes the tension arc. Param: `mapping` ({E,I,L,P,R} scores).
pub struct ArcLayer;

impl Layer for ArcLayer {
    fn name(&self) -> &str {
        "arc"
    }

    fn description(&self) -> &str {
        "map grammar phases to a tension arc"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let mapping: ArcMapping = ctx.typed_param("mapping")?.unwrap_or_default();
        narrative_arc(seq, &mapping).map_err(LayerError::failed)?;
        Ok(())
    }
}

fn graph_param(ctx: &LayerContext<'_>) -> Result<ActionGraph, LayerError> {
    match ctx.typed_param::<ActionManifest>("graph")? {
        Some(manifest) => ActionGraph::from_manifest(&manifest).map_err(LayerError::failed),
        None => Ok(ActionGraph::builtin()),
    }
}

fn copy_visual_node(src: &AttributeNode) -> AttributeNode {
    let mut node = AttributeNode::new(src.kind.clone(), src.name.as_str());
    for key in [
        props::IDENTITY,
        props::POSITION,
        props::SCALE,
        props::FLIP,
        props::VISIBLE,
        props::VISUAL,
    ] {
        if let Some(v) = src.prop(key) {
            node = node.with(key, v.clone());
        }
    }
    node
}

/// Gives every panel a cast and a scene. A panel without characters copies
/// them from the previous panel (the first panel gets `cast` characters
/// from the pool); likewise for a missing scene.
pub fn ensure_composition<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    assets: &AssetPool,
    rng: &mut R,
    cast: usize,
) -> Result<(), LayerError> {
    let panels = seq.panels().to_vec();
    for (k, panel) in panels.iter().enumerate() {
        if seq
            .children_of(*panel, &AttributeType::Character)
            .is_empty()
        {
            let copies: Vec<AttributeNode> = if k == 0 {
                let labels = assets.labels(CHARACTERS);
                (0..cast)
                    .map(|i| {
                        let label = labels
                            .get(i)
                            .cloned()
                            .unwrap_or_else(|| format!("character_{i}"));
                        let x = (i + 1) as f64 / (cast + 1) as f64;
                        AttributeNode::new(AttributeType::Character, label.as_str())
                            .with(props::IDENTITY, label.as_str())
                            .with(props::POSITION, (x, 0.85))
                    })
                    .collect()
            } else {
                seq.children_of(panels[k - 1], &AttributeType::Character)
                    .iter()
                    .filter_map(|id| seq.node(*id))
                    .map(copy_visual_node)
                    .collect()
            };
            for node in copies {
                seq.add_attribute(*panel, node).map_err(model_err)?;
            }
        }
        if seq.children_of(*panel, &AttributeType::Scene).is_empty() {
            let node = if k == 0 {
                let labels = assets.labels(SCENES);
                let label = if labels.is_empty() {
                    String::from("scene")
                } else {
                    labels[rng.random_range(0..labels.len())].clone()
                };
                Some(
                    AttributeNode::new(AttributeType::Scene, label.as_str())
                        .with(props::IDENTITY, label.as_str()),
                )
            } else {
                seq.children_of(panels[k - 1], &AttributeType::Scene)
                    .first()
                    .and_then(|id| seq.node(*id))
                    .map(copy_visual_node)
            };
            if let Some(node) = node {
                seq.add_attribute(*panel, node).map_err(model_err)?;
            }
        }
    }
    Ok(())
}

/// Plans character actions along the tension arc.
///
/// Params: `temperature` (0.5), `tolerance` (1.0), `weight_mode`
/// ("inverse" or "literal"), `scores` (per-action overrides), `start`
/// (identity to first action), `cast` (2), `graph` (action manifest).
pub struct ActionLayer;

impl ActionLayer {
    /// Action scores from the registered sentiment and embedding providers.
    pub fn scores(
        ctx: &LayerContext<'_>,
        graph: &ActionGraph,
    ) -> Result<ActionScoreTable, LayerError> {
        let sentiment = ctx.models.sentiment(model_names::SENTIMENT)?;
        let embedding = ctx.models.embedding(model_names::EMBEDDING)?;
        let mode: WeightMode = ctx.typed_param("weight_mode")?.unwrap_or_default();
        let table = ArousalTable::build(
            &sentiment.labels(),
            &builtin_anchors(),
            embedding.as_ref(),
            mode,
        )
        .map_err(LayerError::failed)?;
        let base = ActionScoreTable::from_affect(graph, sentiment.as_ref(), &table)
            .map_err(LayerError::failed)?;
        let overrides: BTreeMap<String, f64> = ctx.typed_param("scores")?.unwrap_or_default();
        base.with_overrides(&overrides).map_err(LayerError::failed)
    }
}

impl Layer for ActionLayer {
    fn name(&self) -> &str {
        "action"
    }

    fn description(&self) -> &str {
        "plan character actions that follow the tension arc"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let graph = graph_param(ctx)?;
        let cast = ctx.usize_param("cast", 2)?;
        let scores = Self::scores(ctx, &graph)?;
        let params = SelectionParams {
            temperature: ctx.f64_param("temperature", 0.5)?,
            tolerance: ctx.f64_param("tolerance", 1.0)?,
            seed: ctx.rng.random(),
        };
        ensure_composition(seq, ctx.assets, &mut ctx.rng, cast)?;

        let start: BTreeMap<String, String> = ctx.typed_param("start")?.unwrap_or_default();
        let tracks = crate::planner::character_tracks(seq);
        for (identity, action) in &start {
            if !graph.contains(action) {
                return Err(LayerError::param(
                    "start",
                    format!("unknown action `{action}`"),
                ));
            }
            let (_, first) = tracks
                .get(identity)
                .and_then(|t| t.first())
                .ok_or_else(|| LayerError::param("start", format!("no character `{identity}`")))?;
            seq.set_property(*first, props::ACTION, action.as_str())
                .map_err(model_err)?;
        }

        let arc = match TensionCurve::from_sequence(seq) {
            Some(curve) => curve,
            None => TensionCurve::new(default_arc(seq.len())).map_err(LayerError::failed)?,
        };
        plan_actions(seq, &arc, &graph, &scores, &params).map_err(LayerError::failed)?;
        revise_consistency(seq, &graph, &mut ctx.rng);
        Ok(())
    }
}

/// Plans and applies panel transitions.
///
/// Params: `weights` (per-kind weights), `force_peak_action` (true),
/// `cast` (2), `graph` (action manifest).
pub struct TransitionLayer;

impl Layer for TransitionLayer {
    fn name(&self) -> &str {
        "transition"
    }

    fn description(&self) -> &str {
        "choose and apply transitions between consecutive panels"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let graph = graph_param(ctx)?;
        let weights: TransitionWeights = ctx.typed_param("weights")?.unwrap_or_default();
        let force = ctx.bool_param("force_peak_action", true)?;
        let cast = ctx.usize_param("cast", 2)?;
        ensure_composition(seq, ctx.assets, &mut ctx.rng, cast)?;
        let plan =
            plan_transitions(seq, &mut ctx.rng, &weights, force).map_err(LayerError::failed)?;
        apply_plan(seq, &plan, ctx.assets, &graph, &mut ctx.rng).map_err(LayerError::failed)?;
        revise_consistency(seq, &graph, &mut ctx.rng);
        Ok(())
    }
}

/// Attaches one symbol per mapped character action. Re-running it leaves
/// matching symbols untouched.
pub struct SymbolLayer;

impl Layer for SymbolLayer {
    fn name(&self) -> &str {
        "symbol"
    }

    fn description(&self) -> &str {
        "attach expressive symbols to characters from their actions"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let characters: Vec<NodeId> = seq
            .nodes()
            .filter(|n| n.kind == AttributeType::Character)
            .map(|n| n.id)
            .collect();
        for character in characters {
            let action = seq
                .node(character)
                .and_then(|n| n.text(props::ACTION))
                .map(String::from);
            let wanted = action
                .as_deref()
                .and_then(|a| ctx.assets.symbol_mapping().symbol_for(a))
                .map(String::from);
            if let Some(symbol) = &wanted {
                if ctx.assets.get(SYMBOLS, symbol).is_none() {
                    return Err(LayerError::failed(
                        crate::assets::AssetError::UnknownSymbol(symbol.clone()),
                    ));
                }
            }
            let existing = seq.children_of(character, &AttributeType::Symbol);
            let current: Vec<&str> = existing
                .iter()
                .filter_map(|id| seq.node(*id))
                .map(|n| n.name.as_str())
                .collect();
            let unchanged = match &wanted {
                Some(symbol) => current == [symbol.as_str()],
                None => current.is_empty(),
            };
            if unchanged {
                continue;
            }
            for id in existing {
                seq.remove_subtree(id).map_err(model_err)?;
            }
            if let Some(symbol) = wanted {
                let node = AttributeNode::new(AttributeType::Symbol, symbol.as_str())
                    .with(props::OWNER, character.0 as f64)
                    .with(props::OFFSET, DEFAULT_SYMBOL_OFFSET);
                seq.add_attribute(character, node).map_err(model_err)?;
            }
        }
        Ok(())
    }
}

/// Visual set a node kind resolves against by default.
pub fn default_set(kind: &AttributeType) -> &'static str {
    match kind {
        AttributeType::Character => CHARACTERS,
        AttributeType::Scene => crate::assets::SCENES,
        AttributeType::Symbol => SYMBOLS,
        _ => crate::assets::OBJECTS,
    }
}

/// The `set/label` reference a node currently renders with.
pub fn visual_ref(node: &AttributeNode) -> String {
    match node.text(props::VISUAL) {
        Some(v) => v.to_string(),
        None => format!("{}/{}", default_set(&node.kind), node.name),
    }
}

/// Regenerates the visual of one character or scene identity.
///
/// Params: `target` (node id), `prompt`, `model` ("image"), `use_base`
/// (true: the current visual is passed to the provider).
pub struct RedrawLayer;

impl Layer for RedrawLayer {
    fn name(&self) -> &str {
        "redraw"
    }

    fn description(&self) -> &str {
        "regenerate a character or scene visual from a text prompt"
    }

    fn apply(&self, seq: &mut SequenceModel, ctx: &mut LayerContext<'_>) -> Result<(), LayerError> {
        let model = ctx
            .str_param("model")?
            .unwrap_or(model_names::IMAGE)
            .to_string();
        let provider = ctx.models.image(&model)?;
        let target = match ctx.param("target").and_then(serde_json::Value::as_u64) {
            Some(id) => NodeId(id),
            None => return Err(LayerError::param("target", "expected a node id")),
        };
        let prompt = ctx
            .str_param("prompt")?
            .ok_or_else(|| LayerError::param("prompt", "required"))?
            .to_string();
        let use_base = ctx.bool_param("use_base", true)?;
        let node = seq
            .node(target)
            .ok_or_else(|| LayerError::param("target", format!("unknown node {}", target.0)))?;
        if !matches!(node.kind, AttributeType::Character | AttributeType::Scene) {
            return Err(LayerError::param(
                "target",
                "must be a Character or Scene node",
            ));
        }
        let kind = node.kind.clone();
        let identity = node.identity().to_string();
        let current = ctx
            .assets
            .resolve_ref(&visual_ref(node), default_set(&kind));
        let base = use_base.then(|| current.entry.image.clone());
        let image = provider
            .generate(&prompt, base.as_deref())
            .map_err(|e| LayerError::GenerationFailed(e.to_string()))?;
        let hash = mix64(fnv1a(prompt.as_bytes()) ^ image.content_hash());
        let label = format!("{identity}-{hash:016x}");
        let mut entry = VisualEntry::new(image);
        entry.anchor = current.entry.anchor;
        entry.scale = current.entry.scale;
        ctx.assets.insert(GENERATED, &label, entry);
        let reference = format!("{GENERATED}/{label}");
        let targets: Vec<NodeId> = seq
            .nodes()
            .filter(|n| n.kind == kind && n.identity() == identity)
            .map(|n| n.id)
            .collect();
        for id in targets {
            seq.set_property(id, props::VISUAL, reference.as_str())
                .map_err(model_err)?;
        }
        Ok(())
    }
}

/// Node filter of a declarative rule. Every present field must match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeMatch {
    #[serde(rename = "type")]
    pub kind: Option<AttributeType>,
    pub name: Option<String>,
    pub identity: Option<String>,
    /// Grammar phase of the enclosing panel.
    pub phase: Option<VngCategory>,
    /// Action of the node itself.
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(rename = "match", default)]
    pub matcher: NodeMatch,
    pub set: BTreeMap<String, Value>,
}

/// A user layer made of property-set rules, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclarativeLayer {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub rules: Vec<Rule>,
}

impl DeclarativeLayer {
    pub fn from_json(text: &str) -> Result<Self, LayerError> {
        let layer: Self =
            serde_json::from_str(text).map_err(|e| LayerError::param("layer", e.to_string()))?;
        if layer.name.trim().is_empty() {
            return Err(LayerError::param("name", "must not be empty"));
        }
        for rule in &layer.rules {
            for (key, value) in &rule.set {
                crate::model::check_property(key, value).map_err(LayerError::failed)?;
            }
        }
        Ok(layer)
    }

    fn matches(&self, m: &NodeMatch, seq: &SequenceModel, node: &AttributeNode) -> bool {
        if m.kind.as_ref().is_some_and(|k| *k != node.kind) {
            return false;
        }
        if m.name.as_ref().is_some_and(|n| *n != node.name) {
            return false;
        }
        if m.identity.as_ref().is_some_and(|i| i != node.identity()) {
            return false;
        }
        if m.action
            .as_ref()
            .is_some_and(|a| Some(a.as_str()) != node.text(props::ACTION))
        {
            return false;
        }
        if let Some(phase) = m.phase {
            let panel_phase = seq
                .panel_of(node.id)
                .and_then(|p| seq.node(p))
                .and_then(AttributeNode::phase);
            if panel_phase != Some(phase) {
                return false;
            }
        }
        node.kind != AttributeType::Sequence
    }
}

impl Layer for DeclarativeLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn description(&self) -> &str {
        &self.description
    }

    fn apply(
        &self,
        seq: &mut SequenceModel,
        _ctx: &mut LayerContext<'_>,
    ) -> Result<(), LayerError> {
        for rule in &self.rules {
            let hits: Vec<NodeId> = seq
                .nodes()
                .filter(|n| self.matches(&rule.matcher, seq, n))
                .map(|n| n.id)
                .collect();
            for id in hits {
                for (key, value) in &rule.set {
                    seq.set_property(id, key, value.clone())
                        .map_err(model_err)?;
                }
            }
        }
        Ok(())
    }
}
