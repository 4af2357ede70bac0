//! First-error classification of incorrect frames.
//!
//! Only the first divergence from the gold frame is classified. When a
//! teacher-forced prediction is available (the model's argmax at each step
//! given the gold prefix) its first mismatch is used; otherwise the first
//! mismatch of the free-running prediction after the longest common prefix
//! stands in for it. The two sources are labelled so reports can tell them
//! apart.
//!
//! A divergence is classified with a fixed decision list, first match wins:
//!
//! 1. `od` if it is at the root intent and exactly one of the gold and
//!    predicted root labels is out-of-domain;
//! 2. `in` if both tokens open intents with different labels;
//! 3. `sl` if both tokens open slots with different labels;
//! 4. `lf` if both tokens are copied with different text;
//! 5. `md` for every cross-kind confusion, including a premature end.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{self, FrameError, FrameToken, TokenSeq};
use crate::record::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorType {
    Intent,
    Slot,
    Ood,
    Mode,
    Leaf,
}

impl ErrorType {
    pub const ALL: [ErrorType; 5] = [
        ErrorType::Intent,
        ErrorType::Slot,
        ErrorType::Ood,
        ErrorType::Mode,
        ErrorType::Leaf,
    ];

    /// Two-letter column code used in report tables.
    pub fn code(self) -> &'static str {
        match self {
            ErrorType::Intent => "in",
            ErrorType::Slot => "sl",
            ErrorType::Ood => "od",
            ErrorType::Mode => "md",
            ErrorType::Leaf => "lf",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Intent => "intent",
            ErrorType::Slot => "slot",
            ErrorType::Ood => "ood",
            ErrorType::Mode => "mode",
            ErrorType::Leaf => "leaf",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s) || t.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown error type {s:?}"))
    }
}

/// A token at an aligned position, or the end of a sequence that stopped
/// early. `End` counts as an ontology token, so any mismatch against it is a
/// mode error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepToken {
    Token(FrameToken),
    End,
}

impl StepToken {
    fn at(seq: &TokenSeq, i: usize) -> StepToken {
        seq.tokens()
            .get(i)
            .cloned()
            .map_or(StepToken::End, StepToken::Token)
    }
}

impl fmt::Display for StepToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepToken::Token(t) => write!(f, "{t}"),
            StepToken::End => f.write_str("<end>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceSource {
    Forced,
    FreeRunningPrefix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub position: usize,
    pub gold_token: StepToken,
    pub pred_token: StepToken,
    pub source: DivergenceSource,
}

fn first_mismatch(candidate: &TokenSeq, gold: &TokenSeq) -> Option<usize> {
    let common = candidate
        .iter()
        .zip(gold.iter())
        .take_while(|(a, b)| a == b)
        .count();
    (common < candidate.len().max(gold.len())).then_some(common)
}

/// Locates the first error of `pred` against `gold`.
///
/// Returns `None` exactly when `pred` and `gold` match. If the forced
/// sequence agrees with gold everywhere while `pred` does not, the
/// free-running mismatch is reported instead.
pub fn first_divergence(
    pred: &TokenSeq,
    gold: &TokenSeq,
    forced: Option<&TokenSeq>,
) -> Option<Divergence> {
    if frame::exact_match(pred, gold) {
        return None;
    }
    let forced_hit = forced.and_then(|f| first_mismatch(f, gold).map(|pos| (f, pos)));
    let (candidate, position, source) = match forced_hit {
        Some((f, pos)) => (f, pos, DivergenceSource::Forced),
        None => (
            pred,
            first_mismatch(pred, gold).expect("sequences differ"),
            DivergenceSource::FreeRunningPrefix,
        ),
    };
    Some(Divergence {
        position,
        gold_token: StepToken::at(gold, position),
        pred_token: StepToken::at(candidate, position),
        source,
    })
}

/// Decides which intent labels are out-of-domain: an explicit set plus an
/// optional label prefix, matched ASCII case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OodRule {
    pub labels: BTreeSet<String>,
    pub prefix: Option<String>,
}

impl Default for OodRule {
    fn default() -> Self {
        OodRule {
            labels: BTreeSet::new(),
            prefix: Some("UNSUPPORTED".to_owned()),
        }
    }
}

impl OodRule {
    pub fn contains(&self, label: &str) -> bool {
        if self.labels.contains(label) {
            return true;
        }
        match &self.prefix {
            Some(prefix) => label
                .get(..prefix.len())
                .is_some_and(|head| head.eq_ignore_ascii_case(prefix)),
            None => false,
        }
    }
}

/// Classifies a divergence. Total: every divergence gets exactly one type.
///
/// At the root position the predicted root label is read from the divergent
/// token when it opens an intent, falling back to `pred_root_label`.
pub fn classify_error(
    div: &Divergence,
    gold_root_label: &str,
    pred_root_label: Option<&str>,
    ood: &OodRule,
) -> ErrorType {
    use FrameToken::*;
    if div.position == 0 {
        let pred_label = match &div.pred_token {
            StepToken::Token(OpenIntent(l)) => Some(l.as_str()),
            _ => pred_root_label,
        };
        let gold_ood = ood.contains(gold_root_label);
        let pred_ood = pred_label.is_some_and(|l| ood.contains(l));
        if gold_ood != pred_ood {
            return ErrorType::Ood;
        }
    }
    match (&div.gold_token, &div.pred_token) {
        (StepToken::Token(OpenIntent(a)), StepToken::Token(OpenIntent(b))) if a != b => {
            ErrorType::Intent
        }
        (StepToken::Token(OpenSlot(a)), StepToken::Token(OpenSlot(b))) if a != b => ErrorType::Slot,
        (StepToken::Token(Copy(a)), StepToken::Token(Copy(b))) if a != b => ErrorType::Leaf,
        _ => ErrorType::Mode,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketBy {
    Language,
    Domain,
    Depth,
    /// A single bucket for the whole corpus.
    All,
}

impl FromStr for BucketBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "language" => Ok(BucketBy::Language),
            "domain" => Ok(BucketBy::Domain),
            "depth" => Ok(BucketBy::Depth),
            "all" => Ok(BucketBy::All),
            _ => Err(format!("unknown bucket key {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketKey {
    Depth(usize),
    Tag(String),
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::Depth(d) => write!(f, "{d}"),
            BucketKey::Tag(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaxonomyError {
    #[error("record {index} has no {key} tag")]
    MissingBucketKey { index: usize, key: &'static str },
    #[error("record {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: FrameError,
    },
}

/// Per-type error counts for one bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorCounts([usize; 5]);

impl ErrorCounts {
    pub fn get(&self, t: ErrorType) -> usize {
        self.0[t.index()]
    }

    pub fn add(&mut self, t: ErrorType) {
        self.0[t.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn merge(&mut self, other: &ErrorCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

impl Serialize for ErrorCounts {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, usize> = ErrorType::ALL.iter().map(|t| (t.code(), self.get(*t))).collect();
        map.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorDistribution {
    pub bucket: BucketKey,
    /// Records in the bucket, correct or not.
    pub records: usize,
    pub counts: ErrorCounts,
    /// Number of incorrect records; equals the sum of `counts`.
    pub total: usize,
    /// Balanced-bracket rate over the incorrect predictions; absent when
    /// the bucket has none.
    pub tree_validity_rate: Option<f64>,
    pub valid_trees: usize,
    pub forced_divergences: usize,
}

impl ErrorDistribution {
    fn empty(bucket: BucketKey) -> Self {
        ErrorDistribution {
            bucket,
            records: 0,
            counts: ErrorCounts::default(),
            total: 0,
            tree_validity_rate: None,
            valid_trees: 0,
            forced_divergences: 0,
        }
    }

    /// Share of `t` among the classified errors, in percent.
    pub fn percent(&self, t: ErrorType) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.counts.get(t) as f64 / self.total as f64)
    }

    fn merge(&mut self, other: &ErrorDistribution) {
        self.records += other.records;
        self.counts.merge(&other.counts);
        self.total += other.total;
        self.valid_trees += other.valid_trees;
        self.forced_divergences += other.forced_divergences;
        self.tree_validity_rate = (self.total > 0).then(|| self.valid_trees as f64 / self.total as f64);
    }
}

/// The classification outcome for one incorrect record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedError {
    pub divergence: Divergence,
    pub error_type: ErrorType,
    pub pred_balanced: bool,
}

/// Classifies one record; `None` when the prediction is correct.
pub fn classify_record(
    record: &PredictionRecord,
    ood: &OodRule,
) -> Result<Option<ClassifiedError>, FrameError> {
    let gold = record.gold_seq()?;
    let pred = record.pred_seq()?;
    let forced = record.forced_seq().transpose()?;
    let Some(divergence) = first_divergence(&pred, &gold, forced.as_ref()) else {
        return Ok(None);
    };
    let gold_root = gold.tokens()[0]
        .label()
        .map(|l| l.as_str().to_owned())
        .unwrap_or_default();
    let pred_root = match pred.tokens().first() {
        Some(FrameToken::OpenIntent(l)) => Some(l.as_str()),
        _ => None,
    };
    let error_type = classify_error(&divergence, &gold_root, pred_root, ood);
    Ok(Some(ClassifiedError {
        divergence,
        error_type,
        pred_balanced: frame::check_validity(&pred).balanced,
    }))
}

fn bucket_of(record: &PredictionRecord, index: usize, by: BucketBy) -> Result<BucketKey, TaxonomyError> {
    let tag = |value: &Option<String>, key| {
        value
            .clone()
            .map(BucketKey::Tag)
            .ok_or(TaxonomyError::MissingBucketKey { index, key })
    };
    match by {
        BucketBy::Language => tag(&record.language, "language"),
        BucketBy::Domain => tag(&record.domain, "domain"),
        BucketBy::All => Ok(BucketKey::Tag("all".to_owned())),
        BucketBy::Depth => {
            let gold = record
                .gold_seq()
                .map_err(|source| TaxonomyError::Frame { index, source })?;
            let tree = frame::parse(&gold).map_err(|source| TaxonomyError::Frame { index, source })?;
            Ok(BucketKey::Depth(tree.depth()))
        }
    }
}

/// Error distributions per bucket, in ascending bucket order.
///
/// Every bucket that holds at least one record is listed; buckets with no
/// incorrect records have zero counts and no validity rate.
pub fn aggregate(
    records: &[PredictionRecord],
    bucket_by: BucketBy,
    ood: &OodRule,
) -> Result<Vec<ErrorDistribution>, TaxonomyError> {
    let mut buckets: BTreeMap<BucketKey, ErrorDistribution> = BTreeMap::new();
    for (index, record) in records.iter().enumerate() {
        let key = bucket_of(record, index, bucket_by)?;
        let classified =
            classify_record(record, ood).map_err(|source| TaxonomyError::Frame { index, source })?;
        let mut single = ErrorDistribution::empty(key.clone());
        single.records = 1;
        if let Some(c) = classified {
            single.counts.add(c.error_type);
            single.total = 1;
            single.valid_trees = usize::from(c.pred_balanced);
            single.forced_divergences = usize::from(c.divergence.source == DivergenceSource::Forced);
        }
        buckets
            .entry(key.clone())
            .or_insert_with(|| ErrorDistribution::empty(key))
            .merge(&single);
    }
    Ok(buckets.into_values().collect())
}
