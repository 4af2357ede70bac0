//! Random schema-valid frames for property tests and synthetic corpora.

use rand::Rng;

use crate::frame::{FrameTree, IntentNode, Label, SlotContent, SlotNode};
use crate::record::DatasetEntry;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeShape {
    pub intent_labels: Vec<Label>,
    pub slot_labels: Vec<Label>,
    pub words: Vec<String>,
    /// Upper bound on tree depth (at least 1).
    pub max_depth: usize,
    pub max_slots: usize,
    pub max_span: usize,
    /// Probability that a slot below the depth limit nests an intent.
    pub nest_prob: f64,
}

impl TreeShape {
    /// `n_intents` intent labels `IN_0..`, `n_slots` slot labels `SL_0..`,
    /// and `n_words` copy tokens `w0..`.
    pub fn with_vocab(n_intents: usize, n_slots: usize, n_words: usize, max_depth: usize) -> Self {
        let labels = |prefix: &str, n: usize| {
            (0..n)
                .map(|i| Label::new(format!("{prefix}_{i}")).expect("generated label"))
                .collect()
        };
        TreeShape {
            intent_labels: labels("IN", n_intents),
            slot_labels: labels("SL", n_slots),
            words: (0..n_words).map(|i| format!("w{i}")).collect(),
            max_depth: max_depth.max(1),
            max_slots: 3,
            max_span: 3,
            nest_prob: 0.5,
        }
    }
}

fn pick<'a, T, R: Rng>(rng: &mut R, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

fn gen_intent<R: Rng>(rng: &mut R, shape: &TreeShape, budget: usize) -> IntentNode {
    let label = pick(rng, &shape.intent_labels).clone();
    // a slot costs one level; with budget 1 the intent is a leaf
    let n_slots = if budget >= 2 { rng.gen_range(0..=shape.max_slots) } else { 0 };
    let slots = (0..n_slots).map(|_| gen_slot(rng, shape, budget - 1)).collect();
    IntentNode { label, slots }
}

fn gen_slot<R: Rng>(rng: &mut R, shape: &TreeShape, budget: usize) -> SlotNode {
    let label = pick(rng, &shape.slot_labels).clone();
    let content = if budget >= 2 && rng.gen_bool(shape.nest_prob) {
        let n = rng.gen_range(1..=2);
        SlotContent::Intents((0..n).map(|_| gen_intent(rng, shape, budget - 1)).collect())
    } else {
        let n = rng.gen_range(0..=shape.max_span);
        SlotContent::Leaf((0..n).map(|_| pick(rng, &shape.words).clone()).collect())
    };
    SlotNode { label, content }
}

pub fn random_tree<R: Rng>(rng: &mut R, shape: &TreeShape) -> FrameTree {
    FrameTree {
        root: gen_intent(rng, shape, shape.max_depth),
    }
}

/// A dataset whose utterances are the copied words of each frame.
pub fn random_dataset<R: Rng>(rng: &mut R, shape: &TreeShape, n: usize) -> Vec<DatasetEntry> {
    (0..n)
        .map(|_| {
            let tree = random_tree(rng, shape);
            let seq = tree.to_tokens();
            let words: Vec<&str> = seq.iter().filter_map(|t| t.text()).collect();
            let utterance = if words.is_empty() {
                "hello".to_owned()
            } else {
                words.join(" ")
            };
            DatasetEntry::new(utterance, seq.to_string())
        })
        .collect()
}
