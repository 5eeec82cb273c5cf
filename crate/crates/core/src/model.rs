//! The image sequence model.
//!
//! A comic is a tree of [`AttributeNode`]s rooted at a single `Sequence`
//! node. Panels are the root's children and their order is the reading
//! order; characters, scenes, objects and symbols hang below the panels.
//! Nodes live in an arena keyed by [`NodeId`], and ids are handed out
//! monotonically so a fixed seed always produces the same document.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::grammar::{NarrativeStructure, VngCategory};
use crate::transitions::TransitionPlan;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeType {
    Sequence,
    Panel,
    Character,
    Scene,
    Action,
    Transition,
    Symbol,
    /// A non-character visual element (props, objects).
    VisualRef,
    Custom(String),
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeType::Sequence => f.write_str("Sequence"),
            AttributeType::Panel => f.write_str("Panel"),
            AttributeType::Character => f.write_str("Character"),
            AttributeType::Scene => f.write_str("Scene"),
            AttributeType::Action => f.write_str("Action"),
            AttributeType::Transition => f.write_str("Transition"),
            AttributeType::Symbol => f.write_str("Symbol"),
            AttributeType::VisualRef => f.write_str("VisualRef"),
            AttributeType::Custom(name) => write!(f, "Custom:{name}"),
        }
    }
}

impl FromStr for AttributeType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Sequence" => AttributeType::Sequence,
            "Panel" => AttributeType::Panel,
            "Character" => AttributeType::Character,
            "Scene" => AttributeType::Scene,
            "Action" => AttributeType::Action,
            "Transition" => AttributeType::Transition,
            "Symbol" => AttributeType::Symbol,
            "VisualRef" => AttributeType::VisualRef,
            other => match other.strip_prefix("Custom:") {
                Some(name) if !name.is_empty() => AttributeType::Custom(name.to_string()),
                _ => return Err(ModelError::InvalidCustomType(other.to_string())),
            },
        })
    }
}

impl Serialize for AttributeType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttributeType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A typed property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Pair(f64, f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(f64, f64)> {
        match self {
            Value::Pair(x, y) => Some((*x, *y)),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

impl From<(f64, f64)> for Value {
    fn from((x, y): (f64, f64)) -> Self {
        Value::Pair(x, y)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// Well-known property keys.
pub mod props {
    pub const POSITION: &str = "position";
    pub const SCALE: &str = "scale";
    pub const VISIBLE: &str = "visible";
    pub const FLIP: &str = "flip";
    pub const GRAMMAR_PHASE: &str = "grammar_phase";
    pub const TENSION: &str = "tension";
    pub const ACTION: &str = "action";
    pub const VISUAL: &str = "visual";
    pub const IDENTITY: &str = "identity";
    pub const OWNER: &str = "owner";
    pub const OFFSET: &str = "offset";
    pub const VIEWPORT_OFFSET: &str = "viewport_offset";
    pub const ZOOM: &str = "zoom";
    pub const TRANSITION_IN: &str = "transition_in";
    pub const ACTION_CHANGE: &str = "action_change";
}

/// Checks a value against the semantic type of a well-known property.
/// Unknown keys accept any finite value.
pub fn check_property(key: &str, value: &Value) -> Result<(), ModelError> {
    let invalid = |reason: &str| ModelError::InvalidValue {
        property: key.to_string(),
        reason: reason.to_string(),
    };
    let in_range = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo && v <= hi;

    match (key, value) {
        (props::POSITION, Value::Pair(x, y)) => {
            if in_range(*x, 0.0, 1.0) && in_range(*y, 0.0, 1.0) {
                Ok(())
            } else {
                Err(invalid("position must lie in [0,1]^2"))
            }
        }
        (props::VIEWPORT_OFFSET | props::OFFSET, Value::Pair(x, y)) => {
            if in_range(*x, -1.0, 1.0) && in_range(*y, -1.0, 1.0) {
                Ok(())
            } else {
                Err(invalid("offset must lie in [-1,1]^2"))
            }
        }
        (props::SCALE, Value::Number(s)) => {
            if s.is_finite() && *s > 0.0 {
                Ok(())
            } else {
                Err(invalid("scale must be positive"))
            }
        }
        (props::ZOOM, Value::Number(z)) => {
            if z.is_finite() && *z >= 1.0 {
                Ok(())
            } else {
                Err(invalid("zoom must be >= 1"))
            }
        }
        (props::TENSION, Value::Number(t)) => {
            if in_range(*t, 0.0, 10.0) {
                Ok(())
            } else {
                Err(invalid("tension must lie in [0,10]"))
            }
        }
        (props::VISIBLE | props::FLIP | props::ACTION_CHANGE, Value::Bool(_)) => Ok(()),
        (props::GRAMMAR_PHASE, Value::Text(s)) => s
            .parse::<VngCategory>()
            .map(|_| ())
            .map_err(|_| invalid("expected one of E, I, L, P, R")),
        (
            props::ACTION | props::IDENTITY | props::VISUAL | props::TRANSITION_IN,
            Value::Text(s),
        ) => {
            if s.is_empty() {
                Err(invalid("must be non-empty"))
            } else {
                Ok(())
            }
        }
        (props::OWNER, Value::Number(n)) => {
            if n.is_finite() && *n >= 0.0 && libm::floor(*n) == *n {
                Ok(())
            } else {
                Err(invalid("owner must be a node id"))
            }
        }
        (
            props::POSITION
            | props::VIEWPORT_OFFSET
            | props::OFFSET
            | props::SCALE
            | props::ZOOM
            | props::TENSION
            | props::VISIBLE
            | props::FLIP
            | props::ACTION_CHANGE
            | props::GRAMMAR_PHASE
            | props::ACTION
            | props::IDENTITY
            | props::VISUAL
            | props::TRANSITION_IN
            | props::OWNER,
            _,
        ) => Err(invalid("wrong value type")),
        (_, Value::Number(n)) if !n.is_finite() => Err(invalid("numbers must be finite")),
        (_, Value::Pair(x, y)) if !x.is_finite() || !y.is_finite() => {
            Err(invalid("numbers must be finite"))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeNode {
    pub id: NodeId,
    #[serde(rename = "type")]
    pub kind: AttributeType,
    pub name: String,
    #[serde(default)]
    pub properties: BTreeMap<String, Value>,
    #[serde(default)]
    pub children: Vec<NodeId>,
    #[serde(default)]
    pub parent: Option<NodeId>,
}

impl AttributeNode {
    /// A detached node; the id is assigned when it is added to a sequence.
    pub fn new(kind: AttributeType, name: impl Into<String>) -> Self {
        AttributeNode {
            id: NodeId(u64::MAX),
            kind,
            name: name.into(),
            properties: BTreeMap::new(),
            children: Vec::new(),
            parent: None,
        }
    }

    pub fn with_id(mut self, id: NodeId) -> Self {
        self.id = id;
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }

    pub fn prop(&self, key: &str) -> Option<&Value> {
        self.properties.get(key)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.prop(key).and_then(Value::as_str)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.prop(key).and_then(Value::as_f64)
    }

    pub fn pair(&self, key: &str) -> Option<(f64, f64)> {
        self.prop(key).and_then(Value::as_pair)
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.prop(key).and_then(Value::as_bool)
    }

    /// The identity shared by every per-panel copy of the same entity.
    pub fn identity(&self) -> &str {
        self.text(props::IDENTITY).unwrap_or(&self.name)
    }

    pub fn phase(&self) -> Option<VngCategory> {
        self.text(props::GRAMMAR_PHASE).and_then(|s| s.parse().ok())
    }

    fn is_unassigned(&self) -> bool {
        self.id == NodeId(u64::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown parent node {0}")]
    UnknownParent(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node id {0} already exists")]
    DuplicateId(NodeId),
    #[error("attaching {node} under {parent} would create a cycle")]
    CycleRejected { node: NodeId, parent: NodeId },
    #[error("invalid value for `{property}`: {reason}")]
    InvalidValue { property: String, reason: String },
    #[error("{child} nodes cannot be placed under {parent} nodes")]
    InvalidPlacement { child: String, parent: String },
    #[error("custom type `{0}` is not registered")]
    UnknownCustomType(String),
    #[error("invalid custom type `{0}`")]
    InvalidCustomType(String),
    #[error("malformed document: {0}")]
    MalformedDocument(String),
}

/// Canonical serialized form of a [`SequenceModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub root: NodeId,
    pub seed: u64,
    pub revision: u64,
    pub next_id: u64,
    #[serde(default)]
    pub custom_types: Vec<String>,
    pub nodes: Vec<AttributeNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<NarrativeStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<TransitionPlan>,
}

impl SceneDocument {
    pub fn to_json(&self) -> String {
        // Every field is a plain tree of maps, lists and finite numbers.
        serde_json::to_string_pretty(self).expect("scene documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::MalformedDocument(e.to_string()))
    }

    pub fn node(&self, id: NodeId) -> Option<&AttributeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    root: NodeId,
    nodes: BTreeMap<NodeId, AttributeNode>,
    next_id: u64,
    revision: u64,
    seed: u64,
    custom_types: BTreeSet<String>,
    structure: Option<NarrativeStructure>,
    transitions: Option<TransitionPlan>,
}

impl SequenceModel {
    /// A root `Sequence` node with `length` empty panels.
    pub fn new(length: usize, seed: u64) -> Self {
        let root = NodeId(0);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            AttributeNode::new(AttributeType::Sequence, "sequence").with_id(root),
        );
        let mut seq = SequenceModel {
            root,
            nodes,
            next_id: 1,
            revision: 0,
            seed,
            custom_types: BTreeSet::new(),
            structure: None,
            transitions: None,
        };
        seq.pad_or_trim(length);
        seq
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.panels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Panel ids in reading order.
    pub fn panels(&self) -> &[NodeId] {
        &self.nodes[&self.root].children
    }

    pub fn node(&self, id: NodeId) -> Option<&AttributeNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AttributeNode> {
        self.nodes.values()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn structure(&self) -> Option<&NarrativeStructure> {
        self.structure.as_ref()
    }

    pub fn set_structure(&mut self, structure: Option<NarrativeStructure>) {
        self.structure = structure;
    }

    pub fn transitions(&self) -> Option<&TransitionPlan> {
        self.transitions.as_ref()
    }

    pub fn set_transitions(&mut self, plan: Option<TransitionPlan>) {
        self.transitions = plan;
    }

    /// Direct children of `id` with the given type, in child order.
    pub fn children_of(&self, id: NodeId, kind: &AttributeType) -> Vec<NodeId> {
        self.nodes
            .get(&id)
            .map(|n| {
                n.children
                    .iter()
                    .copied()
                    .filter(|c| &self.nodes[c].kind == kind)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Preorder traversal of the subtree rooted at `id`.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![id];
        while let Some(cur) = stack.pop() {
            if let Some(node) = self.nodes.get(&cur) {
                out.push(cur);
                stack.extend(node.children.iter().rev().copied());
            }
        }
        out
    }

    /// The panel containing `id`, if any.
    pub fn panel_of(&self, id: NodeId) -> Option<NodeId> {
        let mut cur = id;
        loop {
            let node = self.nodes.get(&cur)?;
            if node.kind == AttributeType::Panel {
                return Some(cur);
            }
            cur = node.parent?;
        }
    }

    pub fn register_custom_type(&mut self, name: &str) -> Result<(), ModelError> {
        if name.is_empty() || self.custom_types.contains(name) {
            return Err(ModelError::InvalidCustomType(name.to_string()));
        }
        self.custom_types.insert(name.to_string());
        Ok(())
    }

    fn check_placement(
        &self,
        parent: &AttributeNode,
        kind: &AttributeType,
    ) -> Result<(), ModelError> {
        let bad = || ModelError::InvalidPlacement {
            child: kind.to_string(),
            parent: parent.kind.to_string(),
        };
        match kind {
            AttributeType::Sequence => Err(bad()),
            AttributeType::Panel if parent.kind != AttributeType::Sequence => Err(bad()),
            AttributeType::Panel => Ok(()),
            _ if parent.kind == AttributeType::Sequence => Err(bad()),
            AttributeType::Custom(name) if !self.custom_types.contains(name) => {
                Err(ModelError::UnknownCustomType(name.clone()))
            }
            _ => Ok(()),
        }
    }

    /// Adds `node` as the last child of `parent`. A node built with
    /// [`AttributeNode::new`] gets a fresh id; an explicit id must be unused.
    pub fn add_attribute(
        &mut self,
        parent: NodeId,
        mut node: AttributeNode,
    ) -> Result<NodeId, ModelError> {
        let parent_node = self
            .nodes
            .get(&parent)
            .ok_or(ModelError::UnknownParent(parent))?;
        if node.is_unassigned() {
            node.id = NodeId(self.next_id);
        } else if self.nodes.contains_key(&node.id) {
            return Err(ModelError::DuplicateId(node.id));
        }
        if node.id == parent {
            return Err(ModelError::CycleRejected {
                node: node.id,
                parent,
            });
        }
        self.check_placement(parent_node, &node.kind)?;
        for (key, value) in &node.properties {
            check_property(key, value)?;
        }
        if !node.children.is_empty() {
            return Err(ModelError::InvalidValue {
                property: "children".to_string(),
                reason: "new nodes must not carry children".to_string(),
            });
        }
        let id = node.id;
        self.next_id = self.next_id.max(id.0.saturating_add(1));
        node.parent = Some(parent);
        self.nodes.insert(id, node);
        self.nodes
            .get_mut(&parent)
            .expect("checked above")
            .children
            .push(id);
        Ok(id)
    }

    /// Moves an existing subtree under a new parent.
    pub fn reparent(&mut self, node: NodeId, new_parent: NodeId) -> Result<(), ModelError> {
        let kind = self
            .nodes
            .get(&node)
            .ok_or(ModelError::UnknownNode(node))?
            .kind
            .clone();
        let parent_node = self
            .nodes
            .get(&new_parent)
            .ok_or(ModelError::UnknownParent(new_parent))?;
        if node == self.root || self.is_ancestor(node, new_parent) {
            return Err(ModelError::CycleRejected {
                node,
                parent: new_parent,
            });
        }
        self.check_placement(parent_node, &kind)?;
        if let Some(old) = self.nodes[&node].parent {
            self.nodes
                .get_mut(&old)
                .expect("parent exists")
                .children
                .retain(|c| *c != node);
        }
        self.nodes
            .get_mut(&new_parent)
            .expect("checked")
            .children
            .push(node);
        self.nodes.get_mut(&node).expect("checked").parent = Some(new_parent);
        Ok(())
    }

    /// True if `ancestor` is `node` or lies on the path from `node` to the root.
    pub fn is_ancestor(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            cur = self.nodes.get(&id).and_then(|n| n.parent);
        }
        false
    }

    /// Sets a property without touching the revision counter. Pipeline
    /// layers use this; interactive edits go through [`update_node`].
    ///
    /// [`update_node`]: SequenceModel::update_node
    pub fn set_property(
        &mut self,
        id: NodeId,
        key: &str,
        value: impl Into<Value>,
    ) -> Result<(), ModelError> {
        let value = value.into();
        check_property(key, &value)?;
        let node = self.nodes.get_mut(&id).ok_or(ModelError::UnknownNode(id))?;
        node.properties.insert(key.to_string(), value);
        Ok(())
    }

    pub fn remove_property(&mut self, id: NodeId, key: &str) -> Result<Option<Value>, ModelError> {
        let node = self.nodes.get_mut(&id).ok_or(ModelError::UnknownNode(id))?;
        Ok(node.properties.remove(key))
    }

    pub fn rename(&mut self, id: NodeId, name: &str) -> Result<(), ModelError> {
        let node = self.nodes.get_mut(&id).ok_or(ModelError::UnknownNode(id))?;
        node.name = name.to_string();
        Ok(())
    }

    /// An interactive edit: validated set plus a revision bump.
    pub fn update_node(
        &mut self,
        id: NodeId,
        key: &str,
        value: impl Into<Value>,
    ) -> Result<&AttributeNode, ModelError> {
        self.set_property(id, key, value)?;
        self.revision += 1;
        Ok(&self.nodes[&id])
    }

    pub fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Removes a node and everything below it. The root cannot be removed.
    pub fn remove_subtree(&mut self, id: NodeId) -> Result<(), ModelError> {
        if id == self.root {
            return Err(ModelError::CycleRejected {
                node: id,
                parent: id,
            });
        }
        let parent = self
            .nodes
            .get(&id)
            .ok_or(ModelError::UnknownNode(id))?
            .parent;
        for n in self.descendants(id) {
            self.nodes.remove(&n);
        }
        if let Some(p) = parent {
            if let Some(pn) = self.nodes.get_mut(&p) {
                pn.children.retain(|c| *c != id);
            }
        }
        Ok(())
    }

    /// Appends empty panels or drops panels from the end until the sequence
    /// has exactly `target` panels.
    pub fn pad_or_trim(&mut self, target: usize) {
        while self.len() > target {
            let last = *self.panels().last().expect("non-empty");
            self.remove_subtree(last).expect("panel exists");
        }
        while self.len() < target {
            let k = self.len() + 1;
            let panel = AttributeNode::new(AttributeType::Panel, format!("panel {k}"));
            self.add_attribute(self.root, panel)
                .expect("root accepts panels");
        }
    }

    /// Checks the tree invariants: single root, single parent, no cycles,
    /// every stored node reachable exactly once, panels directly under root.
    pub fn validate(&self) -> Result<(), ModelError> {
        let malformed = |m: String| ModelError::MalformedDocument(m);
        let root = self
            .nodes
            .get(&self.root)
            .ok_or_else(|| malformed("missing root".into()))?;
        if root.kind != AttributeType::Sequence || root.parent.is_some() {
            return Err(malformed("root must be a parentless Sequence node".into()));
        }
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![self.root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                return Err(malformed(format!("node {id} reached twice")));
            }
            let node = self
                .nodes
                .get(&id)
                .ok_or_else(|| malformed(format!("dangling child {id}")))?;
            if node.id != id {
                return Err(malformed(format!(
                    "node stored under {id} claims id {}",
                    node.id
                )));
            }
            for c in &node.children {
                let child = self
                    .nodes
                    .get(c)
                    .ok_or_else(|| malformed(format!("dangling child {c}")))?;
                if child.parent != Some(id) {
                    return Err(malformed(format!("node {c} has inconsistent parent")));
                }
                self.check_placement(node, &child.kind)
                    .map_err(|e| malformed(e.to_string()))?;
                stack.push(*c);
            }
            for (k, v) in &node.properties {
                check_property(k, v).map_err(|e| malformed(e.to_string()))?;
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(malformed("unreachable nodes present".into()));
        }
        if let Some(max) = self.nodes.keys().next_back() {
            if max.0 >= self.next_id {
                return Err(malformed("next_id behind existing ids".into()));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> SceneDocument {
        SceneDocument {
            root: self.root,
            seed: self.seed,
            revision: self.revision,
            next_id: self.next_id,
            custom_types: self.custom_types.iter().cloned().collect(),
            nodes: self.nodes.values().cloned().collect(),
            structure: self.structure.clone(),
            transitions: self.transitions.clone(),
        }
    }

    pub fn from_document(doc: &SceneDocument) -> Result<Self, ModelError> {
        let mut nodes = BTreeMap::new();
        for n in &doc.nodes {
            if nodes.insert(n.id, n.clone()).is_some() {
                return Err(ModelError::DuplicateId(n.id));
            }
        }
        let seq = SequenceModel {
            root: doc.root,
            nodes,
            next_id: doc.next_id,
            revision: doc.revision,
            seed: doc.seed,
            custom_types: doc.custom_types.iter().cloned().collect(),
            structure: doc.structure.clone(),
            transitions: doc.transitions.clone(),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_document(&SceneDocument::from_json(text)?)
    }

    /// Characters of a panel keyed by identity.
    pub fn characters_by_identity(&self, panel: NodeId) -> BTreeMap<String, NodeId> {
        self.children_of(panel, &AttributeType::Character)
            .into_iter()
            .map(|c| (self.nodes[&c].identity().to_string(), c))
            .collect()
    }
}
