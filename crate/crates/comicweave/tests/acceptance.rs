//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use comicweave::codec::decode_image;
use comicweave::config::Config;
use comicweave::service::{router, AppState};
use comicweave_core::affect::{
    distance_matrix, mask_two_nearest, ArousalClass, ArousalTable, EmotionAnchor, WeightMode,
};
use comicweave_core::assets::AssetPool;
use comicweave_core::grammar::{
    assign_structure, basic_phase, expand_center_embedded, narrative_arc, ArcMapping,
    NarrativeStructure, PhaseTree, TensionCurve, VngCategory,
};
use comicweave_core::model::props;
use comicweave_core::planner::{
    action_probabilities, adjacency_violations, plan_actions, revise_consistency, ActionGraph,
    ActionScoreTable, SelectionParams,
};
use comicweave_core::providers::{LexiconSentiment, SentimentProvider, TableEmbedding};
use comicweave_core::render::{compose_panel, foreground_bounds, rasterize_panel, Resample};
use comicweave_core::rng::seeded;
use comicweave_core::transitions::{apply_transition, TransitionType, FOCUS_ZOOM};
use comicweave_core::{AttributeNode, AttributeType, Generator, NodeId, SequenceModel};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;
/// (label vectors, labels to score, anchors with their arousal value)
type ToySet<'a> = (Vec<(&'a str, Vec<f64>)>, Vec<&'a str>, Vec<(&'a str, f64)>);
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- grammar ---------------------------------------------------------------

/// Independent recognizer over flattened sequences:
/// `phase := E? slot(I) L? slot(P) R?`, where a slot is its leaf or a
/// nested phase. Returns the reachable end positions.
fn phase_ends(s: &[VngCategory], start: usize, depth: usize) -> BTreeSet<usize> {
    use VngCategory::*;
    let mut out = BTreeSet::new();
    if depth > 6 {
        return out;
    }
    let optional = |c: VngCategory, from: &BTreeSet<usize>| -> BTreeSet<usize> {
        let mut v = from.clone();
        v.extend(
            from.iter()
                .filter(|&&i| s.get(i) == Some(&c))
                .map(|i| i + 1),
        );
        v
    };
    let slot = |c: VngCategory, from: &BTreeSet<usize>| -> BTreeSet<usize> {
        let mut v = BTreeSet::new();
        for &i in from {
            if s.get(i) == Some(&c) {
                v.insert(i + 1);
            }
            v.extend(phase_ends(s, i, depth + 1));
        }
        v
    };
    let e = optional(Establisher, &BTreeSet::from([start]));
    let i = slot(Initial, &e);
    let l = optional(Prolongation, &i);
    let p = slot(Peak, &l);
    out.extend(optional(Release, &p));
    out
}

fn nesting(tree: &PhaseTree) -> usize {
    match tree {
        PhaseTree::Leaf(_) => 0,
        PhaseTree::Phase { children, .. } => children
            .iter()
            .map(|c| match c {
                PhaseTree::Phase { .. } => 1 + nesting(c),
                PhaseTree::Leaf(_) => 0,
            })
            .max()
            .unwrap_or(0),
    }
}

fn grammar_validity() -> Outcome {
    use VngCategory::*;
    let ps = [0.0, 0.3, 1.0];
    let mut longest = 0;
    for seed in 0..1000u64 {
        let p = ps[(seed % 3) as usize];
        let depth = ((seed / 3) % 3) as usize;
        let mut rng = seeded(seed);
        let root = basic_phase(
            rng.random_bool(0.5),
            rng.random_bool(0.5),
            rng.random_bool(0.5),
        );
        let tree = expand_center_embedded(&root, &mut rng, p, depth).map_err(|e| e.to_string())?;
        let flat = tree.flatten();
        ensure(phase_ends(&flat, 0, 0).contains(&flat.len()), || {
            format!("seed {seed}: {flat:?} rejected")
        })?;
        ensure(tree.validate().is_ok(), || {
            format!("seed {seed}: tree validator disagrees")
        })?;
        ensure(flat.contains(&Peak), || format!("seed {seed}: no Peak"))?;
        ensure(nesting(&tree) <= depth, || {
            format!("seed {seed}: nesting {} > {depth}", nesting(&tree))
        })?;
        if p == 0.0 {
            ensure(tree == root, || {
                format!("seed {seed}: p=0 changed the tree")
            })?;
        }
        longest = longest.max(flat.len());
    }
    let basic = NarrativeStructure::basic().flat;
    ensure(
        basic == [Establisher, Initial, Prolongation, Peak, Release],
        || format!("default flattens to {basic:?}"),
    )?;
    Ok(format!(
        "1000 expansions accepted, longest {longest} panels; default = E I L P R"
    ))
}

// ---- tension ---------------------------------------------------------------

fn tension_mapping() -> Outcome {
    let mut seq = SequenceModel::new(5, 0);
    assign_structure(&mut seq, &NarrativeStructure::basic());
    let curve = narrative_arc(&mut seq, &ArcMapping::default()).map_err(|e| e.to_string())?;
    ensure(curve.scores == [0.0, 2.0, 4.0, 6.0, 2.0], || {
        format!("got {:?}", curve.scores)
    })?;
    let on_panels: Vec<Option<f64>> = seq
        .panels()
        .iter()
        .map(|p| seq.node(*p).unwrap().number(props::TENSION))
        .collect();
    ensure(
        on_panels == [Some(0.0), Some(2.0), Some(4.0), Some(6.0), Some(2.0)],
        || format!("panel properties {on_panels:?}"),
    )?;
    Ok("[E,I,L,P,R] -> [0,2,4,6,2]".into())
}

// ---- affect ----------------------------------------------------------------

/// Brute force over every anchor pair; the pair with the smallest
/// (larger distance, its index, smaller distance, its index) wins.
fn affect_oracle(
    vectors: &BTreeMap<String, Vec<f64>>,
    labels: &[&str],
    anchors: &[(&str, f64)],
    inverse: bool,
) -> Vec<f64> {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let raw: Vec<f64> = labels
        .iter()
        .map(|l| {
            let d: Vec<f64> = anchors
                .iter()
                .map(|(a, _)| dist(&vectors[*l], &vectors[*a]))
                .collect();
            let mut pairs = Vec::new();
            for i in 0..d.len() {
                for j in i + 1..d.len() {
                    let (near, far) = if (d[j], j) < (d[i], i) {
                        (j, i)
                    } else {
                        (i, j)
                    };
                    pairs.push(((d[far], far, d[near], near), near, far));
                }
            }
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let (_, i, j) = pairs[0];
            let (d1, d2, v1, v2) = (d[i], d[j], anchors[i].1, anchors[j].1);
            if d1 + d2 == 0.0 {
                v1
            } else if inverse {
                (d2 * v1 + d1 * v2) / (d1 + d2)
            } else {
                (d1 * v1 + d2 * v2) / (d1 + d2)
            }
        })
        .collect();
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|r| {
            if hi > lo {
                2.0 * (r - lo) / (hi - lo) - 1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn class_of(v: f64) -> ArousalClass {
    if v > 0.5 {
        ArousalClass::High
    } else if v < -0.5 {
        ArousalClass::Low
    } else {
        ArousalClass::Medium
    }
}

fn affect_set(
    vectors: &[(&str, Vec<f64>)],
    labels: &[&str],
    anchors: &[(&str, f64)],
) -> Result<f64, String> {
    let map: BTreeMap<String, Vec<f64>> = vectors
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    let embed = TableEmbedding::new(vectors[0].1.len(), map.clone()).map_err(|e| e.to_string())?;
    let anchor_list: Vec<EmotionAnchor> = anchors
        .iter()
        .map(|(l, v)| EmotionAnchor::new(l, class_of(*v)))
        .collect();
    let owned: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    let mut worst = 0.0f64;
    for (mode, inverse) in [(WeightMode::Inverse, true), (WeightMode::Literal, false)] {
        let table =
            ArousalTable::build(&owned, &anchor_list, &embed, mode).map_err(|e| e.to_string())?;
        for (label, want) in labels
            .iter()
            .zip(affect_oracle(&map, labels, anchors, inverse))
        {
            let got = table.get(label).ok_or_else(|| format!("{label} missing"))?;
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-9, || {
                format!("{label} ({mode:?}): {got} vs oracle {want}")
            })?;
            ensure((-1.0..=1.0).contains(&got), || {
                format!("{label}: {got} outside [-1,1]")
            })?;
        }
    }
    let d = distance_matrix(&owned, &anchor_list, &embed).map_err(|e| e.to_string())?;
    for (row, label) in d.iter().zip(labels) {
        let kept = mask_two_nearest(row).iter().filter(|x| x.is_some()).count();
        ensure(kept == 2, || format!("{label}: mask kept {kept}"))?;
    }
    Ok(worst)
}

fn affect_oracle_check() -> Outcome {
    let sets: Vec<ToySet> = vec![
        (
            vec![
                ("hi", vec![0.0, 1.0]),
                ("mid", vec![1.0, 0.0]),
                ("lo", vec![0.0, -1.0]),
                ("joy", vec![0.5, 0.6]),
                ("grief", vec![-0.4, -0.7]),
                ("calm", vec![0.2, -0.3]),
                ("fright", vec![-0.1, 0.9]),
            ],
            vec!["joy", "grief", "calm", "fright"],
            vec![("hi", 1.0), ("mid", 0.0), ("lo", -1.0)],
        ),
        (
            vec![
                ("a", vec![1.0, 0.0]),
                ("b", vec![0.0, 1.0]),
                ("c", vec![-1.0, 0.0]),
                ("d", vec![0.0, -1.0]),
                ("center", vec![0.0, 0.0]),
                ("on_a", vec![1.0, 0.0]),
                ("near_d", vec![0.1, -0.8]),
            ],
            vec!["center", "on_a", "near_d"],
            vec![("a", 1.0), ("b", 0.0), ("c", -1.0), ("d", 1.0)],
        ),
        (
            vec![
                ("x", vec![1.0, 0.0, 0.0]),
                ("y", vec![0.0, 1.0, 0.0]),
                ("z", vec![0.0, 0.0, 1.0]),
                ("s1", vec![0.9, 0.2, 0.1]),
                ("s2", vec![0.1, 0.1, 0.95]),
                ("s3", vec![0.3, 0.7, 0.2]),
                ("s4", vec![0.4, 0.4, 0.4]),
                ("s5", vec![-0.5, 0.2, 0.9]),
                ("s6", vec![0.0, -1.0, 0.0]),
            ],
            vec!["s1", "s2", "s3", "s4", "s5", "s6"],
            vec![("x", 1.0), ("y", 0.0), ("z", -1.0)],
        ),
    ];
    let mut worst = 0.0f64;
    for (k, (vectors, labels, anchors)) in sets.iter().enumerate() {
        worst =
            worst.max(affect_set(vectors, labels, anchors).map_err(|e| format!("set {k}: {e}"))?);
    }
    Ok(format!(
        "3 toy sets, both weightings, max |error| {worst:.1e}"
    ))
}

// ---- planner ---------------------------------------------------------------

fn builtin_scores() -> Result<ActionScoreTable, String> {
    let lex = LexiconSentiment::builtin();
    let table = ArousalTable::build(
        &lex.labels(),
        &comicweave_core::affect::builtin_anchors(),
        &TableEmbedding::builtin(),
        WeightMode::Inverse,
    )
    .map_err(|e| e.to_string())?;
    ActionScoreTable::from_affect(&ActionGraph::builtin(), &lex, &table).map_err(|e| e.to_string())
}

fn cast(n: usize, actors: &[&str]) -> SequenceModel {
    let mut seq = SequenceModel::new(n, 0);
    for p in seq.panels().to_vec() {
        for a in actors {
            seq.add_attribute(
                p,
                AttributeNode::new(AttributeType::Character, *a).with(props::IDENTITY, *a),
            )
            .unwrap();
        }
    }
    seq
}

fn planner_fidelity() -> Outcome {
    let graph = ActionGraph::builtin();
    let scores = builtin_scores()?;
    let params = SelectionParams::default();
    for action in graph.nodes() {
        if graph.is_dead_end(action) {
            continue;
        }
        for step in -40..=40 {
            let delta = f64::from(step) / 10.0;
            let dist = action_probabilities(action, delta, &graph, &scores, &params)
                .map_err(|e| e.to_string())?;
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            ensure((total - 1.0).abs() <= 1e-9, || {
                format!("{action} at {delta}: sum {total}")
            })?;
        }
    }
    let arc = TensionCurve::new(vec![0.0, 2.0, 4.0, 6.0, 2.0]).map_err(|e| e.to_string())?;
    let (mut peak, mut establisher, mut samples) = (0.0, 0.0, 0usize);
    for seed in 0..1000u64 {
        let mut seq = cast(5, &["blue", "pink"]);
        let p = SelectionParams {
            seed,
            ..SelectionParams::default()
        };
        plan_actions(&mut seq, &arc, &graph, &scores, &p).map_err(|e| e.to_string())?;
        revise_consistency(&mut seq, &graph, &mut seeded(seed));
        ensure(adjacency_violations(&seq, &graph).is_empty(), || {
            format!("seed {seed}: violations remain")
        })?;
        // Check adjacency directly as well.
        for who in ["blue", "pink"] {
            let track: Vec<String> = seq
                .panels()
                .iter()
                .map(|p| {
                    let id = seq.characters_by_identity(*p)[who];
                    seq.node(id)
                        .unwrap()
                        .text(props::ACTION)
                        .unwrap()
                        .to_string()
                })
                .collect();
            for w in track.windows(2) {
                let dead = graph
                    .successors(&w[0])
                    .map(|s| s.is_empty())
                    .unwrap_or(true);
                ensure(
                    graph.has_edge(&w[0], &w[1]) || (dead && w[0] == w[1]),
                    || format!("seed {seed}: {who} {} -> {}", w[0], w[1]),
                )?;
            }
            establisher += scores.get(&track[0]).unwrap();
            peak += scores.get(&track[3]).unwrap();
            samples += 1;
        }
    }
    let (pm, em) = (peak / samples as f64, establisher / samples as f64);
    ensure(pm > em, || {
        format!("mean Peak arousal {pm:.3} <= mean Establisher arousal {em:.3}")
    })?;
    Ok(format!(
        "1000 plans, 0 violations; mean arousal Peak {pm:.3} > Establisher {em:.3}"
    ))
}

// ---- showcase --------------------------------------------------------------

fn showcase_path() -> Outcome {
    let graph = ActionGraph::builtin();
    for (a, b) in [("eat", "dizzy"), ("dizzy", "shock"), ("shock", "rest")] {
        ensure(graph.has_edge(a, b), || format!("graph lacks {a} -> {b}"))?;
    }
    let mut seq = SequenceModel::new(4, 42);
    let mut pool = AssetPool::builtin();
    let mut params = BTreeMap::new();
    params.insert(
        "action".to_string(),
        json!({"cast": 1, "start": {"blue": "eat"}}),
    );
    Generator::default()
        .apply_layers(&mut seq, &["arc", "action"], 42, &mut pool, &params)
        .map_err(|e| e.to_string())?;
    let actions: Vec<String> = seq
        .panels()
        .iter()
        .map(|p| {
            let id = seq.characters_by_identity(*p)["blue"];
            seq.node(id)
                .unwrap()
                .text(props::ACTION)
                .unwrap_or("-")
                .to_string()
        })
        .collect();
    ensure(actions == ["eat", "dizzy", "shock", "rest"], || {
        format!("seed 42 gave {actions:?}")
    })?;
    Ok("eat -> dizzy -> shock -> rest (seed 42, 4 panels)".into())
}

// ---- transitions -----------------------------------------------------------

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

fn cast_of(seq: &SequenceModel, panel: NodeId) -> BTreeSet<String> {
    seq.characters_by_identity(panel).into_keys().collect()
}

fn scene_of(seq: &SequenceModel, panel: NodeId) -> Option<String> {
    seq.children_of(panel, &AttributeType::Scene)
        .first()
        .map(|s| seq.node(*s).unwrap().name.clone())
}

fn objects_of(seq: &SequenceModel, panel: NodeId) -> usize {
    seq.children_of(panel, &AttributeType::VisualRef).len()
}

fn viewport(seq: &SequenceModel, panel: NodeId) -> (Option<f64>, Option<(f64, f64)>) {
    let n = seq.node(panel).unwrap();
    (n.number(props::ZOOM), n.pair(props::VIEWPORT_OFFSET))
}

fn transition_contracts() -> Outcome {
    let pool = AssetPool::builtin();
    let graph = ActionGraph::builtin();
    let runs = 40u64;
    for kind in TransitionType::ALL {
        for seed in 0..runs {
            let with_object = seed % 2 == 0;
            let (before, prev, next) = fixture(with_object);
            let mut after = before.clone();
            apply_transition(
                &mut after,
                prev,
                next,
                kind,
                &pool,
                &graph,
                &mut seeded(seed),
            )
            .map_err(|e| format!("{kind} seed {seed}: {e}"))?;
            let fail = |what: &str| format!("{kind} seed {seed}: {what}");
            let prev_subtree = |s: &SequenceModel| {
                std::iter::once(prev)
                    .chain(s.descendants(prev))
                    .map(|id| s.node(id).cloned())
                    .collect::<Vec<_>>()
            };
            ensure(prev_subtree(&after) == prev_subtree(&before), || {
                fail("previous panel modified")
            })?;
            match kind {
                TransitionType::Scene => {
                    ensure(cast_of(&after, next) == cast_of(&before, next), || {
                        fail("cast changed")
                    })?;
                    ensure(scene_of(&after, next) != scene_of(&after, prev), || {
                        fail("scene not changed")
                    })?;
                }
                TransitionType::Alternation => {
                    ensure(cast_of(&after, next) == cast_of(&before, next), || {
                        fail("cast changed")
                    })?;
                    ensure(scene_of(&after, next) != scene_of(&before, next), || {
                        fail("scene not changed")
                    })?;
                }
                TransitionType::Addition => {
                    ensure(objects_of(&after, next) > objects_of(&before, next), || {
                        fail("no object added")
                    })?;
                }
                TransitionType::Object => {
                    ensure(viewport(&after, next) != viewport(&before, next), || {
                        fail("viewport unchanged")
                    })?;
                    ensure(viewport(&after, next).0 == Some(FOCUS_ZOOM), || {
                        fail("zoom not applied")
                    })?;
                }
                TransitionType::Action => {
                    for (who, id) in after.characters_by_identity(next) {
                        let p = after.characters_by_identity(prev)[&who];
                        let (a, b) = (
                            after.node(p).unwrap().text(props::ACTION),
                            after.node(id).unwrap().text(props::ACTION),
                        );
                        ensure(a != b, || fail(&format!("{who} kept action {a:?}")))?;
                    }
                }
            }
        }
    }
    Ok(format!("5 types x {runs} seeds, postconditions hold"))
}

// ---- CLI determinism -------------------------------------------------------

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let out = Command::new(env!("CARGO_BIN_EXE_comicweave"))
            .args([
                "generate",
                "--length",
                "5",
                "--seed",
                "42",
                "--layers",
                "grammar,arc,action,transition,symbol",
                "--out",
            ])
            .arg(&dir)
            .env_remove("COMICWEAVE_CONFIG")
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        let strip = std::fs::read(dir.join("strip.png")).map_err(|e| e.to_string())?;
        let doc = std::fs::read(dir.join("document.json")).map_err(|e| e.to_string())?;
        outputs.push((strip, doc));
    }
    ensure(outputs[0].0 == outputs[1].0, || "strip PNGs differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "documents differ".into())?;
    let strip = decode_image(&outputs[0].0).map_err(|e| e.to_string())?;
    let n = 5u32;
    let expected = n * 512 + (n - 1) * 8;
    ensure(strip.width() == expected, || {
        format!("strip width {} != {expected}", strip.width())
    })?;
    Ok(format!(
        "two seed-42 runs byte-identical; strip {}x{}",
        strip.width(),
        strip.height()
    ))
}

// ---- redraw isolation ------------------------------------------------------

fn redraw_isolation() -> Outcome {
    let size = 512;
    let generator = Generator::default();
    let mut seq = SequenceModel::new(4, 9);
    let mut pool = AssetPool::builtin();
    generator
        .apply_layers(
            &mut seq,
            &["grammar", "arc", "action", "symbol"],
            9,
            &mut pool,
            &BTreeMap::new(),
        )
        .map_err(|e| e.to_string())?;
    let before: Vec<_> = seq
        .panels()
        .iter()
        .map(|p| {
            let layers = compose_panel(&seq, *p, &pool);
            (rasterize_panel(&layers, size, Resample::Nearest), layers)
        })
        .collect();
    let target = seq.characters_by_identity(seq.panels()[0])["blue"];
    let mut params = BTreeMap::new();
    params.insert(
        "redraw".to_string(),
        json!({"target": target.0, "prompt": "einstein icon"}),
    );
    generator
        .apply_layers(&mut seq, &["redraw"], 9, &mut pool, &params)
        .map_err(|e| e.to_string())?;
    let mut changed_total = 0usize;
    for (k, panel) in seq.panels().iter().enumerate() {
        let (old_img, old_layers) = &before[k];
        let new_img = rasterize_panel(&compose_panel(&seq, *panel, &pool), size, Resample::Nearest);
        let blue = seq.characters_by_identity(*panel)["blue"];
        let idx = old_layers
            .foreground
            .iter()
            .position(|f| f.node == blue)
            .ok_or("target missing from foreground")?;
        let bounds = foreground_bounds(old_layers, size)[idx]
            .ok_or_else(|| format!("panel {k}: target not drawn"))?;
        let mut inside = 0usize;
        for y in 0..size {
            for x in 0..size {
                let changed = old_img.get(x, y) != new_img.get(x, y);
                if bounds.contains(i64::from(x), i64::from(y)) {
                    inside += usize::from(changed);
                } else {
                    ensure(!changed, || {
                        format!("panel {k}: pixel ({x},{y}) outside the target changed")
                    })?;
                }
            }
        }
        ensure(inside > 0, || format!("panel {k}: target pixels unchanged"))?;
        changed_total += inside;
    }
    Ok(format!(
        "{} panels, {changed_total} pixels changed, all inside target bounds",
        seq.len()
    ))
}

// ---- service atomicity -----------------------------------------------------

fn service_atomicity() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = Config::default();
        config.output.dir = tmp.path().to_path_buf();
        let app = router(Arc::new(
            AppState::from_config(config).map_err(|e| e.to_string())?,
        ));
        let call = |method: Method, uri: String, body: Option<Value>| {
            let app = app.clone();
            async move {
                let req = Request::builder()
                    .method(method)
                    .uri(uri)
                    .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
                    .unwrap();
                let resp = app.oneshot(req).await.unwrap();
                let status = resp.status();
                let bytes = resp.into_body().collect().await.unwrap().to_bytes();
                (
                    status,
                    serde_json::from_slice::<Value>(&bytes).unwrap_or(Value::Null),
                )
            }
        };
        let (status, created) = call(
            Method::POST,
            "/sessions".into(),
            Some(json!({"length": 5, "seed": 42})),
        )
        .await;
        ensure(status == StatusCode::CREATED, || {
            format!("create returned {status}")
        })?;
        let id = created["session_id"].as_str().unwrap().to_string();
        let (status, _) = call(
            Method::POST,
            format!("/sessions/{id}/layers/apply"),
            Some(json!({"layers": ["arc", "action"]})),
        )
        .await;
        ensure(status == StatusCode::OK, || {
            format!("setup apply returned {status}")
        })?;
        let (_, before) = call(Method::GET, format!("/sessions/{id}/document"), None).await;
        let (status, _) = call(
            Method::POST,
            format!("/sessions/{id}/layers/apply"),
            Some(json!({"layers": ["grammar", "nosuch"]})),
        )
        .await;
        ensure(status == StatusCode::UNPROCESSABLE_ENTITY, || {
            format!("bad apply returned {status}")
        })?;
        let (_, after) = call(Method::GET, format!("/sessions/{id}/document"), None).await;
        ensure(before == after, || {
            "document changed after a failed apply".into()
        })?;
        let web_ui = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../web-ui/dist");
        Ok(format!(
            "422 returned, document unchanged at revision {}; web-ui build present: {}",
            after["revision"],
            web_ui.exists()
        ))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("grammar validity", grammar_validity),
        ("tension mapping", tension_mapping),
        ("affect oracle", affect_oracle_check),
        ("planner fidelity", planner_fidelity),
        ("showcase path", showcase_path),
        ("transition contracts", transition_contracts),
        ("end-to-end determinism", cli_determinism),
        ("redraw isolation", redraw_isolation),
        ("service atomicity", service_atomicity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
