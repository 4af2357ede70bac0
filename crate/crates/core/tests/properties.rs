mod common;

use frameprobe::confidence::{self, Example, FeatureMask, FeatureVector, TrainConfig};
use frameprobe::frame::{self, FrameToken, TokenSeq};
use frameprobe::oracle;
use frameprobe::perturb::{self, ModeEdit, PerturbError, PerturbationSpec, ProbProfile};
use frameprobe::synth;
use frameprobe::taxonomy::{self, ErrorType, OodRule, StepToken};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_text(seed: u64, max_depth: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::random_tree(&mut rng, &common::shape(max_depth)).to_tokens().to_string()
}

fn token_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["[IN:A", "[IN:B", "[SL:S", "[SL:T", "]", "x", "y"])
}

fn mixed_examples(seed: u64, n: usize) -> Vec<Example> {
    let records = common::predictions(seed, n, 0.7, ProbProfile::default());
    confidence::label_records(&records, FeatureMask::ALL).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_inverts_parse(seed in any::<u64>(), depth in 1usize..=8) {
        let text = tree_text(seed, depth);
        let seq = frame::tokenize(&text).unwrap();
        let tree = frame::parse(&seq).unwrap();
        prop_assert_eq!(frame::serialize(&tree), text);
        prop_assert_eq!(tree.to_tokens(), seq);
    }

    #[test]
    fn balance_matches_stack_simulation(tokens in prop::collection::vec(token_strategy(), 0..16)) {
        let seq = frame::tokenize(&tokens.join(" "));
        match seq {
            Ok(seq) => prop_assert_eq!(frame::check_validity(&seq).balanced, common::stack_balanced(&tokens)),
            Err(_) => prop_assert!(tokens.is_empty()),
        }
    }

    #[test]
    fn depth_matches_recursive_count(seed in any::<u64>(), depth in 1usize..=8) {
        let text = tree_text(seed, depth);
        let tree = frame::parse(&frame::tokenize(&text).unwrap()).unwrap();
        prop_assert_eq!(tree.depth(), common::recursive_depth(&text));
        prop_assert!(tree.depth() <= depth);
    }

    #[test]
    fn exact_match_is_reflexive_and_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let x = frame::tokenize(&tree_text(a, 4)).unwrap();
        let y = frame::tokenize(&tree_text(b, 4)).unwrap();
        prop_assert!(frame::exact_match(&x, &x));
        prop_assert_eq!(frame::exact_match(&x, &y), frame::exact_match(&y, &x));
    }

    #[test]
    fn deleting_a_close_unbalances(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let seq = frame::tokenize(&tree_text(seed, 6)).unwrap();
        let closes: Vec<usize> = seq.iter().enumerate().filter(|(_, t)| **t == FrameToken::Close).map(|(i, _)| i).collect();
        let mut tokens = seq.0.clone();
        tokens.remove(closes[pick.index(closes.len())]);
        prop_assert!(!frame::check_validity(&TokenSeq(tokens)).balanced);
    }

    #[test]
    fn divergence_absent_iff_exact_match_and_prefix_agrees(a in any::<u64>(), b in any::<u64>()) {
        let gold = frame::tokenize(&tree_text(a, 4)).unwrap();
        let pred = frame::tokenize(&tree_text(b, 4)).unwrap();
        let div = taxonomy::first_divergence(&pred, &gold, None);
        prop_assert_eq!(div.is_none(), frame::exact_match(&pred, &gold));
        if let Some(d) = div {
            prop_assert_eq!(&pred.tokens()[..d.position], &gold.tokens()[..d.position]);
            prop_assert_ne!(&d.gold_token, &d.pred_token);
            let ty = taxonomy::classify_error(&d, "X", None, &OodRule::default());
            prop_assert!(ErrorType::ALL.contains(&ty));
            if d.gold_token == StepToken::End || d.pred_token == StepToken::End {
                prop_assert_eq!(ty, ErrorType::Mode);
            }
        }
    }

    #[test]
    fn perturbation_is_one_edit_and_recoverable(seed in any::<u64>(), ty in prop::sample::select(ErrorType::ALL.to_vec())) {
        let entries = common::dataset(seed, 1, 5);
        let ontology = common::ontology_of(&common::dataset(7, 50, 5));
        let gold = entries[0].frame_seq().unwrap();
        let p = match perturb::perturb(&gold, &PerturbationSpec::new(ty, seed), &ontology) {
            Ok(p) => p,
            Err(PerturbError::TypeNotApplicable(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let a: Vec<String> = gold.iter().map(|t| t.to_string()).collect();
        let b: Vec<String> = p.seq.iter().map(|t| t.to_string()).collect();
        prop_assert_eq!(common::levenshtein(&a, &b), 1);
        let d = taxonomy::first_divergence(&p.seq, &gold, None).unwrap();
        prop_assert_eq!(d.position, p.position);
        let root = gold.tokens()[0].label().unwrap().as_str();
        let pred_root = p.seq.tokens()[0].label().map(|l| l.as_str());
        prop_assert_eq!(taxonomy::classify_error(&d, root, pred_root, &ontology.ood_rule()), ty);
    }

    #[test]
    fn delete_close_always_unbalances(seed in any::<u64>()) {
        let gold = common::dataset(seed, 1, 5)[0].frame_seq().unwrap();
        let ontology = common::ontology_of(&common::dataset(7, 20, 5));
        let mut spec = PerturbationSpec::new(ErrorType::Mode, seed);
        spec.mode_edit = Some(ModeEdit::DeleteClose);
        if let Ok(p) = perturb::perturb(&gold, &spec, &ontology) {
            prop_assert!(!frame::check_validity(&p.seq).balanced);
        }
    }

    #[test]
    fn struct_oracle_inverts(seed in any::<u64>()) {
        let text = tree_text(seed, 6);
        let seq = frame::tokenize(&text).unwrap();
        let pair = oracle::build_struct_oracle("u", &seq).unwrap();
        let spans = oracle::extract_leaf_spans(&frame::parse(&seq).unwrap());
        prop_assert_eq!(oracle::reconstruct(&pair.snippet, &spans).unwrap(), seq.clone());
        let z = frame::tokenize(&pair.snippet).unwrap();
        prop_assert!(frame::check_validity(&z).balanced);

        let span_pair = oracle::build_span_oracle("u", &seq).unwrap();
        let total: usize = spans.iter().map(|s| s.tokens.len()).sum();
        prop_assert_eq!(span_pair.snippet.split_whitespace().count(), total + spans.len());
        for snippet in [&pair.snippet, &span_pair.snippet] {
            let markers: Vec<usize> = snippet.split_whitespace().filter_map(oracle::parse_marker).collect();
            prop_assert_eq!(markers, (1..=spans.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn validity_feature_counts_unclosed(tokens in prop::collection::vec(token_strategy(), 1..20)) {
        let text = tokens.join(" ");
        let seq = frame::tokenize(&text).unwrap();
        let fv = confidence::features_of(&seq, None, FeatureMask::ALL.without(confidence::Feature::Confidence)).unwrap();
        prop_assert_eq!(fv.validity, common::unclosed(&text));
        prop_assert_eq!(fv.length, tokens.len() as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_lengths_keeps_decisions(seed in any::<u64>(), scale in 0.5f64..20.0) {
        let examples = mixed_examples(seed, 120);
        let scaled: Vec<Example> = examples
            .iter()
            .map(|e| Example {
                features: FeatureVector::new(e.features.length * scale, e.features.validity, e.features.confidence, FeatureMask::ALL),
                correct: e.correct,
            })
            .collect();
        let config = TrainConfig::default();
        let a = confidence::train(&examples, &config).unwrap();
        let b = confidence::train(&scaled, &config).unwrap();
        for (x, y) in examples.iter().zip(&scaled) {
            let pa = confidence::predict(&a, &x.features).unwrap();
            let pb = confidence::predict(&b, &y.features).unwrap();
            prop_assert!((pa.margin - pb.margin).abs() < 1e-6);
            prop_assert_eq!(pa.correct, pb.correct);
        }
    }

    #[test]
    fn score_increases_with_confidence(seed in any::<u64>(), lo in 0.01f64..0.98, step in 0.001f64..0.02) {
        let model = confidence::train(&mixed_examples(seed, 120), &TrainConfig::default()).unwrap();
        let w = model.features.iter().position(|f| *f == confidence::Feature::Confidence).unwrap();
        prop_assume!(model.weights[w] > 0.0);
        let at = |c: f64| confidence::predict(&model, &FeatureVector::new(9.0, 0.0, c, FeatureMask::ALL)).unwrap();
        let (a, b) = (at(lo), at(lo + step));
        prop_assert!(b.margin > a.margin);
        prop_assert!(b.score >= a.score);
    }

    #[test]
    fn training_is_deterministic_and_loss_never_rises(seed in any::<u64>()) {
        let examples = mixed_examples(seed, 150);
        let config = TrainConfig::default();
        let (a, losses) = confidence::train_with_history(&examples, &config).unwrap();
        let (b, _) = confidence::train_with_history(&examples, &config).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>()) {
        let a = common::predictions(seed, 40, 0.3, ProbProfile::default());
        let b = common::predictions(seed, 40, 0.3, ProbProfile::default());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn taxonomy_round_trip_on_generated_corpus() {
    let entries = common::dataset(2024, 200, 6);
    let ontology = common::ontology_of(&entries);
    let rule = ontology.ood_rule();
    let mut applied = 0;
    for (i, entry) in entries.iter().enumerate() {
        let gold = entry.frame_seq().unwrap();
        let root = gold.tokens()[0].label().unwrap().as_str().to_owned();
        for ty in ErrorType::ALL {
            let Ok(p) = perturb::perturb(&gold, &PerturbationSpec::new(ty, i as u64), &ontology) else {
                continue;
            };
            applied += 1;
            let d = taxonomy::first_divergence(&p.seq, &gold, None).unwrap();
            let pred_root = p.seq.tokens()[0].label().map(|l| l.as_str());
            assert_eq!(taxonomy::classify_error(&d, &root, pred_root, &rule), ty, "{gold} -> {}", p.seq);
        }
    }
    assert!(applied >= 800, "only {applied} applicable injections");
}
