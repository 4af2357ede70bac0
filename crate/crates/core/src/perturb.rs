//! Controlled single-error injection for building labelled test corpora.
//!
//! Each injection realizes one error type with exactly one token edit
//! (a substitution or a deletion) placed so that the first divergence from
//! the gold frame is the edited position:
//!
//! | type   | edit |
//! |--------|------|
//! | intent | swap an intent label for the smallest other in-domain intent |
//! | slot   | swap a slot label for the smallest other slot label |
//! | ood    | swap the root label into or out of the out-of-domain set |
//! | leaf   | drop the first token of a multi-token span, or substitute a copied token |
//! | mode   | replace a close with a copied token, a copied token with a close, or delete a close |
//!
//! Randomness (which site is edited, synthetic token probabilities) comes
//! from ChaCha8 seeded with `seed_from_u64`, which produces the same stream
//! on every platform. Corpus synthesis derives record seeds as
//! `seed ^ record_index`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{self, FrameToken, Label, TokenKind, TokenSeq};
use crate::record::{DatasetEntry, PredictionRecord};
use crate::taxonomy::{ErrorType, OodRule};

const PICK_STREAM: u64 = 1;
const PROB_STREAM: u64 = 2;
const CORRECT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("corpus has no frames")]
    EmptyCorpus,
    #[error("frame is not schema-valid: {0}")]
    InvalidFrame(#[from] frame::FrameError),
    #[error("{0} cannot be injected into this frame")]
    TypeNotApplicable(ErrorType),
    #[error("invalid probability profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub intent_labels: BTreeSet<Label>,
    pub slot_labels: BTreeSet<Label>,
    /// Subset of `intent_labels`.
    pub ood_labels: BTreeSet<Label>,
}

impl Ontology {
    /// The rule that classifies exactly this ontology's out-of-domain labels.
    pub fn ood_rule(&self) -> OodRule {
        OodRule {
            labels: self.ood_labels.iter().map(|l| l.as_str().to_owned()).collect(),
            prefix: None,
        }
    }

    fn in_domain_intents(&self) -> impl Iterator<Item = &Label> {
        self.intent_labels.iter().filter(|l| !self.ood_labels.contains(*l))
    }
}

/// Collects every label seen in `frames`; intents matching `ood` become the
/// out-of-domain set.
pub fn scan_ontology<'a, I>(frames: I, ood: &OodRule) -> Result<Ontology, PerturbError>
where
    I: IntoIterator<Item = &'a TokenSeq>,
{
    let mut ontology = Ontology::default();
    let mut seen_any = false;
    for frame in frames {
        seen_any = true;
        for tok in frame {
            match tok {
                FrameToken::OpenIntent(l) => {
                    if ood.contains(l.as_str()) {
                        ontology.ood_labels.insert(l.clone());
                    }
                    ontology.intent_labels.insert(l.clone());
                }
                FrameToken::OpenSlot(l) => {
                    ontology.slot_labels.insert(l.clone());
                }
                _ => {}
            }
        }
    }
    if !seen_any {
        return Err(PerturbError::EmptyCorpus);
    }
    Ok(ontology)
}

/// Target mean token probabilities for correct and incorrect predictions,
/// with uniform jitter of ±`jitter` around the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbProfile {
    pub correct_mean: f64,
    pub incorrect_mean: f64,
    pub jitter: f64,
}

impl ProbProfile {
    pub fn new(correct_mean: f64, incorrect_mean: f64, jitter: f64) -> Result<Self, PerturbError> {
        let bad = |msg: &str| Err(PerturbError::InvalidProfile(msg.to_owned()));
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(correct_mean) || !open_unit(incorrect_mean) {
            return bad("means must lie in (0, 1)");
        }
        if incorrect_mean >= correct_mean {
            return bad("incorrect_mean must be below correct_mean");
        }
        let limit = correct_mean
            .min(1.0 - correct_mean)
            .min(incorrect_mean)
            .min(1.0 - incorrect_mean);
        if !(0.0..limit).contains(&jitter) {
            return bad("jitter must be non-negative and keep every value inside (0, 1)");
        }
        Ok(ProbProfile {
            correct_mean,
            incorrect_mean,
            jitter,
        })
    }
}

impl Default for ProbProfile {
    fn default() -> Self {
        ProbProfile {
            correct_mean: 0.9,
            incorrect_mean: 0.6,
            jitter: 0.02,
        }
    }
}

impl FromStr for ProbProfile {
    type Err = PerturbError;

    /// `correct_mean,incorrect_mean,jitter`, e.g. `0.9,0.6,0.02`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| PerturbError::InvalidProfile(e.to_string()))?;
        match parts[..] {
            [c, i, j] => ProbProfile::new(c, i, j),
            _ => Err(PerturbError::InvalidProfile("expected three comma-separated numbers".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeEdit {
    CloseToCopy,
    CopyToClose,
    DeleteClose,
}

impl ModeEdit {
    pub const ALL: [ModeEdit; 3] = [ModeEdit::CloseToCopy, ModeEdit::CopyToClose, ModeEdit::DeleteClose];

    pub fn name(self) -> &'static str {
        match self {
            ModeEdit::CloseToCopy => "close-to-copy",
            ModeEdit::CopyToClose => "copy-to-close",
            ModeEdit::DeleteClose => "delete-close",
        }
    }
}

impl FromStr for ModeEdit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModeEdit::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode edit {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub error_type: ErrorType,
    pub seed: u64,
    pub prob_profile: ProbProfile,
    /// Restricts mode injections to one edit; any applicable edit otherwise.
    pub mode_edit: Option<ModeEdit>,
}

impl PerturbationSpec {
    pub fn new(error_type: ErrorType, seed: u64) -> Self {
        PerturbationSpec {
            error_type,
            seed,
            prob_profile: ProbProfile::default(),
            mode_edit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Substitute,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbed {
    pub seq: TokenSeq,
    pub position: usize,
    /// Short name of the edit, e.g. `delete-close` or `drop-first`.
    pub edit: &'static str,
}

struct Candidate {
    position: usize,
    edit: Edit,
    replacement: Option<FrameToken>,
    name: &'static str,
}

impl Candidate {
    fn substitute(position: usize, token: FrameToken, name: &'static str) -> Self {
        Candidate {
            position,
            edit: Edit::Substitute,
            replacement: Some(token),
            name,
        }
    }

    fn delete(position: usize, name: &'static str) -> Self {
        Candidate {
            position,
            edit: Edit::Delete,
            replacement: None,
            name,
        }
    }

    fn apply(&self, frame: &TokenSeq) -> TokenSeq {
        let mut tokens = frame.tokens().to_vec();
        match self.edit {
            Edit::Substitute => tokens[self.position] = self.replacement.clone().expect("replacement"),
            Edit::Delete => {
                tokens.remove(self.position);
            }
        }
        TokenSeq::new(tokens)
    }
}

fn smallest_other<'a>(labels: impl Iterator<Item = &'a Label>, current: &Label) -> Option<Label> {
    labels.filter(|l| *l != current).min().cloned()
}

/// Deleting the token at `i` first diverges at `i` only if the next token differs.
fn deletion_diverges_in_place(tokens: &[FrameToken], i: usize) -> bool {
    tokens.get(i + 1).is_none_or(|next| *next != tokens[i])
}

fn smallest_copy_other_than(tokens: &[FrameToken], text: Option<&str>) -> Option<String> {
    tokens
        .iter()
        .filter_map(FrameToken::text)
        .filter(|t| Some(*t) != text)
        .min()
        .map(str::to_owned)
}

fn candidates(frame: &TokenSeq, spec: &PerturbationSpec, ontology: &Ontology) -> Vec<Candidate> {
    let tokens = frame.tokens();
    let mut out = Vec::new();
    match spec.error_type {
        ErrorType::Intent => {
            for (i, tok) in tokens.iter().enumerate() {
                let FrameToken::OpenIntent(label) = tok else { continue };
                if i == 0 && ontology.ood_labels.contains(label) {
                    continue;
                }
                if let Some(alt) = smallest_other(ontology.in_domain_intents(), label) {
                    out.push(Candidate::substitute(i, FrameToken::OpenIntent(alt), "swap-intent"));
                }
            }
        }
        ErrorType::Slot => {
            for (i, tok) in tokens.iter().enumerate() {
                let FrameToken::OpenSlot(label) = tok else { continue };
                if let Some(alt) = smallest_other(ontology.slot_labels.iter(), label) {
                    out.push(Candidate::substitute(i, FrameToken::OpenSlot(alt), "swap-slot"));
                }
            }
        }
        ErrorType::Ood => {
            if let Some(FrameToken::OpenIntent(root)) = tokens.first() {
                let alt = if ontology.ood_labels.contains(root) {
                    ontology.in_domain_intents().min().cloned()
                } else {
                    ontology.ood_labels.iter().min().cloned()
                };
                if let Some(alt) = alt {
                    out.push(Candidate::substitute(0, FrameToken::OpenIntent(alt), "swap-root-ood"));
                }
            }
        }
        ErrorType::Leaf => {
            let mut i = 0;
            while i < tokens.len() {
                if tokens[i].kind() != TokenKind::Copy {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < tokens.len() && tokens[i].kind() == TokenKind::Copy {
                    i += 1;
                }
                if i - start >= 2 && tokens[start] != tokens[start + 1] {
                    out.push(Candidate::delete(start, "drop-first"));
                } else {
                    let text = tokens[start].text().expect("copy token");
                    let replacement = smallest_copy_other_than(tokens, Some(text))
                        .unwrap_or_else(|| format!("{text}{text}"));
                    out.push(Candidate::substitute(start, FrameToken::Copy(replacement), "substitute-copy"));
                }
            }
        }
        ErrorType::Mode => {
            let allowed = |m: ModeEdit| spec.mode_edit.is_none_or(|only| only == m);
            let filler = smallest_copy_other_than(tokens, None);
            for (i, tok) in tokens.iter().enumerate() {
                match tok.kind() {
                    TokenKind::Close => {
                        if allowed(ModeEdit::CloseToCopy) {
                            if let Some(text) = &filler {
                                out.push(Candidate::substitute(
                                    i,
                                    FrameToken::Copy(text.clone()),
                                    ModeEdit::CloseToCopy.name(),
                                ));
                            }
                        }
                        if allowed(ModeEdit::DeleteClose) && deletion_diverges_in_place(tokens, i) {
                            out.push(Candidate::delete(i, ModeEdit::DeleteClose.name()));
                        }
                    }
                    TokenKind::Copy if allowed(ModeEdit::CopyToClose) => {
                        out.push(Candidate::substitute(i, FrameToken::Close, ModeEdit::CopyToClose.name()));
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

/// Injects one error of `spec.error_type` into a schema-valid frame.
///
/// The edit site is drawn from the applicable sites with `spec.seed`; the
/// replacement label or token is always the lexicographically smallest
/// alternative.
pub fn perturb(frame: &TokenSeq, spec: &PerturbationSpec, ontology: &Ontology) -> Result<Perturbed, PerturbError> {
    frame::parse(frame)?;
    let mut sites = candidates(frame, spec, ontology);
    if sites.is_empty() {
        return Err(PerturbError::TypeNotApplicable(spec.error_type));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(PICK_STREAM);
    let chosen = sites.swap_remove(rng.gen_range(0..sites.len()));
    Ok(Perturbed {
        seq: chosen.apply(frame),
        position: chosen.position,
        edit: chosen.name,
    })
}

/// One synthetic probability per token, centered on the profile's correct or
/// incorrect mean.
pub fn synth_probs(tokens: &TokenSeq, is_correct: bool, profile: &ProbProfile, seed: u64) -> Vec<f64> {
    let mean = if is_correct {
        profile.correct_mean
    } else {
        profile.incorrect_mean
    };
    if profile.jitter == 0.0 {
        return vec![mean; tokens.len()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROB_STREAM);
    (0..tokens.len())
        .map(|_| mean + rng.gen_range(-profile.jitter..=profile.jitter))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// `None` cycles through all five types by record index.
    pub error_type: Option<ErrorType>,
    pub seed: u64,
    pub prob_profile: ProbProfile,
    pub mode_edit: Option<ModeEdit>,
    /// Probability that a record is left correct (pred = gold).
    pub correct_fraction: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            error_type: None,
            seed: 0,
            prob_profile: ProbProfile::default(),
            mode_edit: None,
            correct_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub records: Vec<PredictionRecord>,
    /// Dataset indices where the requested type could not be injected.
    pub skipped: Vec<(usize, ErrorType)>,
}

/// Turns a gold dataset into prediction records with known errors.
pub fn synthesize(entries: &[DatasetEntry], ontology: &Ontology, config: &SynthesisConfig) -> Result<Synthesized, PerturbError> {
    let mut records = Vec::with_capacity(entries.len());
    let mut skipped = Vec::new();
    for (index, entry) in entries.iter().enumerate() {
        let gold = entry.frame_seq()?;
        let seed = config.seed ^ index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CORRECT_STREAM);
        let keep_correct = config.correct_fraction > 0.0 && rng.gen_bool(config.correct_fraction.min(1.0));

        let mut record = PredictionRecord::new(entry.utterance.clone(), gold.to_string(), String::new());
        record.language = entry.language.clone();
        record.domain = entry.domain.clone();
        let pred = if keep_correct {
            gold.clone()
        } else {
            let error_type = config
                .error_type
                .unwrap_or(ErrorType::ALL[index % ErrorType::ALL.len()]);
            let spec = PerturbationSpec {
                error_type,
                seed,
                prob_profile: config.prob_profile,
                mode_edit: config.mode_edit,
            };
            match perturb(&gold, &spec, ontology) {
                Ok(p) => {
                    record.injected_type = Some(error_type);
                    record.injected_position = Some(p.position);
                    record.injected_edit = Some(p.edit.to_owned());
                    p.seq
                }
                Err(PerturbError::TypeNotApplicable(t)) => {
                    skipped.push((index, t));
                    continue;
                }
                Err(e) => return Err(e),
            }
        };
        record.token_probs = Some(synth_probs(&pred, keep_correct, &config.prob_profile, seed));
        record.pred = pred.to_string();
        records.push(record);
    }
    Ok(Synthesized { records, skipped })
}

impl fmt::Display for Perturbed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} at {})", self.seq, self.edit, self.position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{check_validity, tokenize};

    fn seq(s: &str) -> TokenSeq {
        tokenize(s).unwrap()
    }

    fn ontology(intents: &[&str], slots: &[&str]) -> Ontology {
        let label = |s: &&str| Label::new(*s).unwrap();
        let intent_labels: BTreeSet<Label> = intents.iter().map(label).collect();
        Ontology {
            ood_labels: intent_labels
                .iter()
                .filter(|l| OodRule::default().contains(l.as_str()))
                .cloned()
                .collect(),
            intent_labels,
            slot_labels: slots.iter().map(label).collect(),
        }
    }

    #[test]
    fn scan_examples() {
        let rule = OodRule::default();
        let frames = [seq("[IN:X [SL:A a ] ]")];
        let o = scan_ontology(&frames, &rule).unwrap();
        assert_eq!(o.intent_labels.iter().map(Label::as_str).collect::<Vec<_>>(), ["X"]);
        assert_eq!(o.slot_labels.iter().map(Label::as_str).collect::<Vec<_>>(), ["A"]);
        assert!(o.ood_labels.is_empty());

        let frames = [seq("[IN:UNSUPPORTED ]"), seq("[IN:GET_EVENT ]")];
        let o = scan_ontology(&frames, &rule).unwrap();
        assert_eq!(o.ood_labels.iter().map(Label::as_str).collect::<Vec<_>>(), ["UNSUPPORTED"]);

        assert_eq!(scan_ontology(&[], &rule), Err(PerturbError::EmptyCorpus));
    }

    #[test]
    fn slot_swap_picks_only_alternative() {
        let o = ontology(&["X"], &["A", "B"]);
        let p = perturb(&seq("[IN:X [SL:A a ] ]"), &PerturbationSpec::new(ErrorType::Slot, 0), &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:X [SL:B a ] ]");
        assert_eq!(p.position, 1);
    }

    #[test]
    fn delete_only_close() {
        let o = ontology(&["X"], &["A"]);
        let mut spec = PerturbationSpec::new(ErrorType::Mode, 3);
        spec.mode_edit = Some(ModeEdit::DeleteClose);
        let p = perturb(&seq("[IN:X ]"), &spec, &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:X");
        assert_eq!(p.edit, "delete-close");
        assert!(!check_validity(&p.seq).balanced);
    }

    #[test]
    fn leaf_drop_first() {
        let o = ontology(&["X"], &["DATE"]);
        let p = perturb(&seq("[IN:X [SL:DATE on Monday ] ]"), &PerturbationSpec::new(ErrorType::Leaf, 0), &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:X [SL:DATE Monday ] ]");
        assert_eq!(p.position, 2);
        assert_eq!(p.edit, "drop-first");
    }

    #[test]
    fn leaf_repeated_first_token_substitutes() {
        let o = ontology(&["X"], &["A"]);
        let p = perturb(&seq("[IN:X [SL:A a a ] ]"), &PerturbationSpec::new(ErrorType::Leaf, 0), &o).unwrap();
        assert_eq!(p.edit, "substitute-copy");
        assert_eq!(p.seq.to_string(), "[IN:X [SL:A aa a ] ]");
    }

    #[test]
    fn not_applicable() {
        let o = ontology(&["X"], &["A"]);
        let f = seq("[IN:X ]");
        for t in [ErrorType::Slot, ErrorType::Leaf, ErrorType::Intent, ErrorType::Ood] {
            assert_eq!(
                perturb(&f, &PerturbationSpec::new(t, 0), &o),
                Err(PerturbError::TypeNotApplicable(t))
            );
        }
        let mut spec = PerturbationSpec::new(ErrorType::Mode, 0);
        spec.mode_edit = Some(ModeEdit::CopyToClose);
        assert!(perturb(&f, &spec, &o).is_err());
        assert!(matches!(
            perturb(&seq("[IN:X a ]"), &PerturbationSpec::new(ErrorType::Mode, 0), &o),
            Err(PerturbError::InvalidFrame(_))
        ));
    }

    #[test]
    fn ood_swaps_both_ways() {
        let o = ontology(&["GET_EVENT", "UNSUPPORTED", "PLAY"], &["A"]);
        let spec = PerturbationSpec::new(ErrorType::Ood, 0);
        let p = perturb(&seq("[IN:PLAY [SL:A a ] ]"), &spec, &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:UNSUPPORTED [SL:A a ] ]");
        let p = perturb(&seq("[IN:UNSUPPORTED ]"), &spec, &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:GET_EVENT ]");
        assert_eq!(p.position, 0);
    }

    #[test]
    fn intent_never_lands_on_ood() {
        let o = ontology(&["B", "UNSUPPORTED", "X"], &["A"]);
        let spec = PerturbationSpec::new(ErrorType::Intent, 0);
        let p = perturb(&seq("[IN:X ]"), &spec, &o).unwrap();
        assert_eq!(p.seq.to_string(), "[IN:B ]");
        // an out-of-domain root is off limits
        assert!(perturb(&seq("[IN:UNSUPPORTED ]"), &spec, &o).is_err());
    }

    #[test]
    fn perturb_is_deterministic() {
        let o = ontology(&["X", "Y"], &["A", "B"]);
        let f = seq("[IN:X [SL:A a b ] [SL:B [IN:Y [SL:A c ] ] ] ]");
        for t in ErrorType::ALL {
            let spec = PerturbationSpec::new(t, 99);
            assert_eq!(perturb(&f, &spec, &o), perturb(&f, &spec, &o));
        }
    }

    #[test]
    fn profile_validation() {
        assert!(ProbProfile::new(0.9, 0.6, 0.02).is_ok());
        assert!(ProbProfile::new(0.6, 0.9, 0.02).is_err());
        assert!(ProbProfile::new(0.9, 0.6, 0.1).is_err());
        assert!(ProbProfile::new(1.0, 0.6, 0.0).is_err());
        assert_eq!("0.9,0.6,0.02".parse::<ProbProfile>().unwrap(), ProbProfile::default());
        assert!("0.9,0.6".parse::<ProbProfile>().is_err());
    }

    #[test]
    fn synth_probs_examples() {
        let f = seq("[IN:X [SL:A a b ] ]");
        let flat = ProbProfile::new(0.9, 0.6, 0.0).unwrap();
        assert_eq!(synth_probs(&f, true, &flat, 1), vec![0.9; 6]);
        assert_eq!(synth_probs(&f, false, &flat, 1), vec![0.6; 6]);

        let p = ProbProfile::default();
        assert_eq!(synth_probs(&f, true, &p, 5), synth_probs(&f, true, &p, 5));
        assert_ne!(synth_probs(&f, true, &p, 5), synth_probs(&f, true, &p, 6));

        let long = TokenSeq::new(vec![FrameToken::copy("w"); 50]);
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        for seed in 0..20 {
            let c = synth_probs(&long, true, &p, seed);
            assert!(c.iter().all(|x| (x - 0.9).abs() <= 0.02 + 1e-12 && *x > 0.0 && *x < 1.0));
            assert!((mean(c) - 0.9).abs() < 0.05);
            assert!((mean(synth_probs(&long, false, &p, seed)) - 0.6).abs() < 0.05);
        }
    }

    #[test]
    fn synthesize_tags_and_skips() {
        let entries = vec![
            DatasetEntry::new("u0", "[IN:X [SL:A a ] ]"),
            DatasetEntry::new("u1", "[IN:X ]"),
        ];
        let o = ontology(&["X"], &["A", "B"]);
        let config = SynthesisConfig {
            error_type: Some(ErrorType::Slot),
            seed: 7,
            ..SynthesisConfig::default()
        };
        let out = synthesize(&entries, &o, &config).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped, vec![(1, ErrorType::Slot)]);
        let r = &out.records[0];
        assert_eq!(r.pred, "[IN:X [SL:B a ] ]");
        assert_eq!(r.injected_type, Some(ErrorType::Slot));
        assert_eq!(r.injected_position, Some(1));
        assert_eq!(r.token_probs.as_ref().unwrap().len(), 5);
        assert!(r.validate().is_ok());
        assert_eq!(synthesize(&entries, &o, &config).unwrap(), out);
    }
}
