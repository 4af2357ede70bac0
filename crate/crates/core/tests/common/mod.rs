#![allow(dead_code)]

use frameprobe::frame::TokenSeq;
use frameprobe::perturb::{self, Ontology, ProbProfile, SynthesisConfig};
use frameprobe::record::{DatasetEntry, PredictionRecord};
use frameprobe::synth::{self, TreeShape};
use frameprobe::taxonomy::OodRule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bracket balance by simulating a stack over raw token strings.
pub fn stack_balanced(tokens: &[&str]) -> bool {
    let mut stack = Vec::new();
    for t in tokens {
        if t.starts_with("[IN:") || t.starts_with("[SL:") {
            stack.push(*t);
        } else if *t == "]" && stack.pop().is_none() {
            return false;
        }
    }
    stack.is_empty()
}

/// Maximum nesting of bracket-opening tokens, computed by recursive descent
/// over the frame text.
pub fn recursive_depth(text: &str) -> usize {
    fn descend(tokens: &[&str], pos: &mut usize) -> usize {
        let mut deepest = 0;
        while *pos < tokens.len() {
            let t = tokens[*pos];
            *pos += 1;
            if t == "]" {
                return deepest;
            }
            if t.starts_with('[') {
                deepest = deepest.max(1 + descend(tokens, pos));
            }
        }
        deepest
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    descend(&tokens, &mut 0)
}

/// Unclosed brackets counted over the text, floored at zero.
pub fn unclosed(text: &str) -> f64 {
    let opens = text.split_whitespace().filter(|t| t.starts_with("[IN:") || t.starts_with("[SL:")).count();
    let closes = text.split_whitespace().filter(|t| *t == "]").count();
    opens.saturating_sub(closes) as f64
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn shape(max_depth: usize) -> TreeShape {
    let mut shape = TreeShape::with_vocab(30, 30, 40, max_depth);
    shape.intent_labels.push(frameprobe::frame::Label::new("UNSUPPORTED").unwrap());
    shape
}

pub fn dataset(seed: u64, n: usize, max_depth: usize) -> Vec<DatasetEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::random_dataset(&mut rng, &shape(max_depth), n)
}

pub fn ontology_of(entries: &[DatasetEntry]) -> Ontology {
    let frames: Vec<TokenSeq> = entries.iter().map(|e| e.frame_seq().unwrap()).collect();
    perturb::scan_ontology(&frames, &OodRule::default()).unwrap()
}

/// Predictions with roughly `correct_fraction` exact matches and all five
/// error types among the rest.
pub fn predictions(seed: u64, n: usize, correct_fraction: f64, profile: ProbProfile) -> Vec<PredictionRecord> {
    let entries = dataset(seed, n * 2, 5);
    let ontology = ontology_of(&entries);
    let config = SynthesisConfig {
        seed,
        prob_profile: profile,
        correct_fraction,
        ..SynthesisConfig::default()
    };
    let mut records = perturb::synthesize(&entries, &ontology, &config).unwrap().records;
    records.truncate(n);
    assert_eq!(records.len(), n);
    records
}
