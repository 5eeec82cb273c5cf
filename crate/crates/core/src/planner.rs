//! Action causal graph and arc-constrained action selection.
//!
//! Every character walks the action graph panel by panel. At each step the
//! planner compares the change the tension arc asks for with the change in
//! arousal each candidate reaction would produce, keeps the candidates
//! within a tolerance of the best fit, and samples among them with a
//! softmax over the mismatch.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{action_arousal, AffectError, ArousalTable};
use crate::grammar::TensionCurve;
use crate::model::{props, AttributeType, NodeId, SequenceModel};
use crate::providers::SentimentProvider;
use crate::rng::seeded;

pub const ACTION_GRAPH_JSON: &str = include_str!("../data/action_graph.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("malformed action manifest: {0}")]
    MalformedManifest(String),
    #[error("edge endpoint `{0}` is not a declared action")]
    UndeclaredEndpoint(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{0}` has no successors")]
    NoSuccessors(String),
    #[error("arc has {arc} entries but the sequence has {panels} panels")]
    LengthMismatch { arc: usize, panels: usize },
    #[error("action `{0}` has no arousal score")]
    MissingScore(String),
    #[error("invalid selection parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Affect(#[from] AffectError),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ActionManifest {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

/// Directed cause → reaction graph over action labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGraph {
    nodes: Vec<String>,
    successors: BTreeMap<String, Vec<String>>,
}

impl ActionGraph {
    pub fn from_manifest(manifest: &ActionManifest) -> Result<Self, PlannerError> {
        let mut successors: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for n in &manifest.nodes {
            if n.is_empty() {
                return Err(PlannerError::MalformedManifest("empty action label".into()));
            }
            if successors.insert(n.clone(), Vec::new()).is_some() {
                return Err(PlannerError::MalformedManifest(alloc::format!(
                    "duplicate action `{n}`"
                )));
            }
        }
        for (cause, reaction) in &manifest.edges {
            for end in [cause, reaction] {
                if !successors.contains_key(end) {
                    return Err(PlannerError::UndeclaredEndpoint(end.clone()));
                }
            }
            if cause == reaction {
                return Err(PlannerError::MalformedManifest(alloc::format!(
                    "self-loop on `{cause}`"
                )));
            }
            let list = successors.get_mut(cause).expect("declared");
            if !list.contains(reaction) {
                list.push(reaction.clone());
            }
        }
        Ok(ActionGraph {
            nodes: manifest.nodes.clone(),
            successors,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PlannerError> {
        let manifest: ActionManifest = serde_json::from_str(text)
            .map_err(|e| PlannerError::MalformedManifest(e.to_string()))?;
        Self::from_manifest(&manifest)
    }

    pub fn builtin() -> Self {
        Self::from_json(ACTION_GRAPH_JSON).expect("bundled action graph is valid")
    }

    pub fn to_manifest(&self) -> ActionManifest {
        let edges = self
            .nodes
            .iter()
            .flat_map(|n| {
                self.successors[n]
                    .iter()
                    .map(move |s| (n.clone(), s.clone()))
            })
            .collect();
        ActionManifest {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    /// Actions in declaration order.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn contains(&self, action: &str) -> bool {
        self.successors.contains_key(action)
    }

    /// One-step reactions of `action`, in manifest order.
    pub fn successors(&self, action: &str) -> Result<&[String], PlannerError> {
        self.successors
            .get(action)
            .map(Vec::as_slice)
            .ok_or_else(|| PlannerError::UnknownAction(action.to_string()))
    }

    pub fn has_edge(&self, cause: &str, reaction: &str) -> bool {
        self.successors
            .get(cause)
            .is_some_and(|s| s.iter().any(|r| r == reaction))
    }

    /// True for actions with no reactions, and for labels outside the graph.
    pub fn is_dead_end(&self, action: &str) -> bool {
        self.successors.get(action).is_none_or(Vec::is_empty)
    }

    /// Whether `next` may follow `prev` for the same character.
    pub fn allows(&self, prev: &str, next: &str) -> bool {
        self.has_edge(prev, next) || (prev == next && self.is_dead_end(prev))
    }
}

/// Action label → arousal score in [-1, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionScoreTable {
    entries: BTreeMap<String, f64>,
}

impl ActionScoreTable {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, PlannerError> {
        if entries.values().any(|s| !(-1.0..=1.0).contains(s)) {
            return Err(PlannerError::InvalidParams(
                "action scores must lie in [-1,1]",
            ));
        }
        Ok(ActionScoreTable { entries })
    }

    /// Scores every graph action by running its label through the
    /// sentiment provider and the arousal table.
    pub fn from_affect(
        graph: &ActionGraph,
        sentiment: &dyn SentimentProvider,
        table: &ArousalTable,
    ) -> Result<Self, PlannerError> {
        let mut entries = BTreeMap::new();
        for action in graph.nodes() {
            entries.insert(action.clone(), action_arousal(action, sentiment, table)?);
        }
        Ok(ActionScoreTable { entries })
    }

    /// Replaces scores with user-provided values.
    pub fn with_overrides(
        mut self,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<Self, PlannerError> {
        for (label, score) in overrides {
            if !(-1.0..=1.0).contains(score) {
                return Err(PlannerError::InvalidParams(
                    "action scores must lie in [-1,1]",
                ));
            }
            self.entries.insert(label.clone(), *score);
        }
        Ok(self)
    }

    pub fn get(&self, action: &str) -> Option<f64> {
        self.entries.get(action).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn covers(&self, graph: &ActionGraph) -> Result<(), PlannerError> {
        match graph
            .nodes()
            .iter()
            .find(|n| !self.entries.contains_key(*n))
        {
            Some(missing) => Err(PlannerError::MissingScore(missing.clone())),
            None => Ok(()),
        }
    }

    fn score(&self, action: &str) -> Result<f64, PlannerError> {
        self.get(action)
            .ok_or_else(|| PlannerError::MissingScore(action.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub temperature: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            temperature: 0.5,
            tolerance: 1.0,
            seed: 0,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(PlannerError::InvalidParams("temperature must be positive"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(PlannerError::InvalidParams(
                "tolerance must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Selection distribution over the successors of `current`, in successor
/// order. Candidates farther than `tolerance` from the best fit get zero.
pub fn action_probabilities(
    current: &str,
    desired_delta: f64,
    graph: &ActionGraph,
    scores: &ActionScoreTable,
    params: &SelectionParams,
) -> Result<Vec<(String, f64)>, PlannerError> {
    params.validate()?;
    let candidates = graph.successors(current)?;
    if candidates.is_empty() {
        return Err(PlannerError::NoSuccessors(current.to_string()));
    }
    let base = scores.score(current)?;
    let mismatch = candidates
        .iter()
        .map(|c| Ok(libm::fabs(desired_delta - (scores.score(c)? - base))))
        .collect::<Result<Vec<f64>, PlannerError>>()?;
    let best = mismatch.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = mismatch
        .iter()
        .map(|m| {
            if *m <= best + params.tolerance {
                libm::exp(-(m - best) / params.temperature)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(candidates
        .iter()
        .cloned()
        .zip(weights.into_iter().map(|w| w / total))
        .collect())
}

/// Draws one label from a distribution produced by [`action_probabilities`].
pub fn sample<R: Rng + ?Sized>(dist: &[(String, f64)], rng: &mut R) -> String {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (label, p) in dist {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(label);
        if u < acc {
            return label.clone();
        }
    }
    last.expect("distribution has positive mass").clone()
}

/// Per identity, the (panel index, character node) occurrences in reading order.
pub fn character_tracks(seq: &SequenceModel) -> BTreeMap<String, Vec<(usize, NodeId)>> {
    let mut tracks: BTreeMap<String, Vec<(usize, NodeId)>> = BTreeMap::new();
    for (k, panel) in seq.panels().iter().enumerate() {
        for (identity, node) in seq.characters_by_identity(*panel) {
            tracks.entry(identity).or_default().push((k, node));
        }
    }
    tracks
}

fn action_of(seq: &SequenceModel, node: NodeId) -> Option<String> {
    seq.node(node)
        .and_then(|n| n.text(props::ACTION))
        .map(|s| s.to_string())
}

fn set_action(seq: &mut SequenceModel, node: NodeId, action: &str) {
    seq.set_property(node, props::ACTION, action)
        .expect("action labels are non-empty");
}

/// Desired arousal change between two panels: the arc difference rescaled
/// by half the arc's maximum so it is commensurable with scores in [-1, 1].
pub fn desired_delta(arc: &TensionCurve, from: usize, to: usize) -> f64 {
    let half = arc.max() / 2.0;
    if half <= 0.0 {
        0.0
    } else {
        (arc.scores[to] - arc.scores[from]) / half
    }
}

/// Assigns an action to every character in every panel.
///
/// The first appearance of a character keeps its action, or draws one
/// uniformly from the graph. Each later appearance is sampled from the
/// successors of the previous one; characters stuck on a dead end hold
/// their action.
pub fn plan_actions(
    seq: &mut SequenceModel,
    arc: &TensionCurve,
    graph: &ActionGraph,
    scores: &ActionScoreTable,
    params: &SelectionParams,
) -> Result<(), PlannerError> {
    params.validate()?;
    if arc.len() != seq.len() {
        return Err(PlannerError::LengthMismatch {
            arc: arc.len(),
            panels: seq.len(),
        });
    }
    scores.covers(graph)?;
    let mut rng = seeded(params.seed);
    for track in character_tracks(seq).values() {
        let (_, first_node) = track[0];
        let mut current = match action_of(seq, first_node) {
            Some(a) => a,
            None => {
                if graph.nodes().is_empty() {
                    continue;
                }
                let pick = graph.nodes()[rng.random_range(0..graph.nodes().len())].clone();
                set_action(seq, first_node, &pick);
                pick
            }
        };
        for pair in track.windows(2) {
            let (from, _) = pair[0];
            let (to, node) = pair[1];
            let next = if graph.is_dead_end(&current) {
                current.clone()
            } else {
                let delta = desired_delta(arc, from, to);
                let dist = action_probabilities(&current, delta, graph, scores, params)?;
                sample(&dist, &mut rng)
            };
            set_action(seq, node, &next);
            current = next;
        }
    }
    Ok(())
}

/// Consecutive (previous, next) action pairs per character that the
/// graph does not allow.
pub fn adjacency_violations(seq: &SequenceModel, graph: &ActionGraph) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for track in character_tracks(seq).values() {
        for pair in track.windows(2) {
            let (a, b) = (pair[0].1, pair[1].1);
            match (action_of(seq, a), action_of(seq, b)) {
                (None, _) => {}
                (Some(_), None) => out.push((a, b)),
                (Some(x), Some(y)) if !graph.allows(&x, &y) => out.push((a, b)),
                _ => {}
            }
        }
    }
    out
}

/// Repairs every disallowed consecutive pair by resampling the later action
/// from the earlier one's successors. Returns the number of repairs.
pub fn revise_consistency<R: Rng + ?Sized>(
    seq: &mut SequenceModel,
    graph: &ActionGraph,
    rng: &mut R,
) -> usize {
    let mut repairs = 0;
    for track in character_tracks(seq).values() {
        for pair in track.windows(2) {
            let (a, b) = (pair[0].1, pair[1].1);
            let Some(prev) = action_of(seq, a) else {
                continue;
            };
            let ok = action_of(seq, b).is_some_and(|next| graph.allows(&prev, &next));
            if ok {
                continue;
            }
            let replacement = if graph.is_dead_end(&prev) {
                prev
            } else {
                let succ = graph.successors(&prev).expect("not a dead end");
                succ[rng.random_range(0..succ.len())].clone()
            };
            set_action(seq, b, &replacement);
            repairs += 1;
        }
    }
    repairs
}

/// Labels of every action currently present on a character.
pub fn assigned_actions(seq: &SequenceModel) -> BTreeSet<String> {
    seq.nodes()
        .filter(|n| n.kind == AttributeType::Character)
        .filter_map(|n| n.text(props::ACTION).map(|s| s.to_string()))
        .collect()
}
