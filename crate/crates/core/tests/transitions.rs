use std::collections::BTreeSet;
use std::sync::OnceLock;

use comicweave_core::assets::AssetPool;
use comicweave_core::model::props;
use comicweave_core::planner::ActionGraph;
use comicweave_core::rng::seeded;
use comicweave_core::transitions::{
    apply_transition, plan_transitions, TransitionType, TransitionWeights, FOCUS_ZOOM,
};
use comicweave_core::{AttributeNode, AttributeType, NodeId, SequenceModel};
use proptest::prelude::*;

fn fixture(with_object: bool) -> (SequenceModel, NodeId, NodeId) {
    let mut seq = SequenceModel::new(2, 5);
    let panels = seq.panels().to_vec();
    for p in &panels {
        seq.add_attribute(
            *p,
            AttributeNode::new(AttributeType::Scene, "garden").with(props::IDENTITY, "garden"),
        )
        .unwrap();
        for (id, action, x) in [("blue", "run", 0.3), ("pink", "walk", 0.7)] {
            let c = AttributeNode::new(AttributeType::Character, id)
                .with(props::IDENTITY, id)
                .with(props::ACTION, action)
                .with(props::POSITION, (x, 0.85));
            seq.add_attribute(*p, c).unwrap();
        }
        if with_object {
            seq.add_attribute(
                *p,
                AttributeNode::new(AttributeType::VisualRef, "apple")
                    .with(props::POSITION, (0.8, 0.9)),
            )
            .unwrap();
        }
    }
    (seq, panels[0], panels[1])
}

fn identities(seq: &SequenceModel, panel: NodeId) -> BTreeSet<String> {
    seq.characters_by_identity(panel).into_keys().collect()
}

fn scene(seq: &SequenceModel, panel: NodeId) -> String {
    seq.node(seq.children_of(panel, &AttributeType::Scene)[0])
        .unwrap()
        .name
        .clone()
}

fn objects(seq: &SequenceModel, panel: NodeId) -> Vec<String> {
    seq.children_of(panel, &AttributeType::VisualRef)
        .iter()
        .map(|o| seq.node(*o).unwrap().name.clone())
        .collect()
}

fn subtree(seq: &SequenceModel, panel: NodeId) -> Vec<AttributeNode> {
    std::iter::once(panel)
        .chain(seq.descendants(panel))
        .map(|id| seq.node(id).unwrap().clone())
        .collect()
}

fn pool() -> &'static AssetPool {
    static POOL: OnceLock<AssetPool> = OnceLock::new();
    POOL.get_or_init(AssetPool::builtin)
}

fn apply(
    kind: TransitionType,
    seed: u64,
    with_object: bool,
) -> (SequenceModel, SequenceModel, NodeId, NodeId) {
    let (before, prev, next) = fixture(with_object);
    let mut after = before.clone();
    apply_transition(
        &mut after,
        prev,
        next,
        kind,
        pool(),
        &ActionGraph::builtin(),
        &mut seeded(seed),
    )
    .unwrap();
    (before, after, prev, next)
}

proptest! {
    #[test]
    fn scene_changes_background_only(seed in any::<u64>()) {
        let (before, after, prev, next) = apply(TransitionType::Scene, seed, true);
        prop_assert_ne!(scene(&after, next), scene(&after, prev));
        prop_assert_eq!(identities(&after, next), identities(&before, next));
        prop_assert_eq!(subtree(&after, prev), subtree(&before, prev));
    }

    #[test]
    fn alternation_keeps_cast(seed in any::<u64>(), with_object in any::<bool>()) {
        let (before, after, prev, next) = apply(TransitionType::Alternation, seed, with_object);
        prop_assert_ne!(scene(&after, next), scene(&before, next));
        prop_assert_ne!(objects(&after, next), objects(&before, next));
        prop_assert_eq!(identities(&after, next), identities(&before, next));
        prop_assert_eq!(subtree(&after, prev), subtree(&before, prev));
    }

    #[test]
    fn addition_adds_objects(seed in any::<u64>(), with_object in any::<bool>()) {
        let (before, after, prev, next) = apply(TransitionType::Addition, seed, with_object);
        prop_assert!(objects(&after, next).len() > objects(&before, next).len());
        prop_assert_eq!(subtree(&after, prev), subtree(&before, prev));
    }

    #[test]
    fn object_moves_viewport(seed in any::<u64>(), with_object in any::<bool>()) {
        let (before, after, prev, next) = apply(TransitionType::Object, seed, with_object);
        let panel = after.node(next).unwrap();
        prop_assert_eq!(panel.number(props::ZOOM), Some(FOCUS_ZOOM));
        prop_assert!(panel.pair(props::VIEWPORT_OFFSET).is_some());
        prop_assert!(!objects(&after, next).is_empty());
        prop_assert_ne!(subtree(&after, next), subtree(&before, next));
        prop_assert_eq!(subtree(&after, prev), subtree(&before, prev));
    }

    #[test]
    fn action_changes_actions(seed in any::<u64>()) {
        let (before, after, prev, next) = apply(TransitionType::Action, seed, false);
        for (id, node) in after.characters_by_identity(next) {
            let p = after.characters_by_identity(prev)[&id];
            prop_assert_ne!(after.node(node).unwrap().text(props::ACTION), after.node(p).unwrap().text(props::ACTION));
        }
        prop_assert_eq!(after.node(next).unwrap().flag(props::ACTION_CHANGE), Some(true));
        prop_assert_eq!(subtree(&after, prev), subtree(&before, prev));
    }

    #[test]
    fn application_is_deterministic(seed in any::<u64>(), k in 0usize..5) {
        let kind = TransitionType::ALL[k];
        let (_, a, _, _) = apply(kind, seed, true);
        let (_, b, _, _) = apply(kind, seed, true);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn plan_length(n in 0usize..20, seed in any::<u64>()) {
        let seq = SequenceModel::new(n, 0);
        let plan = plan_transitions(&seq, &mut seeded(seed), &TransitionWeights::default(), true).unwrap();
        prop_assert_eq!(plan.entries.len(), n.saturating_sub(1));
    }
}
