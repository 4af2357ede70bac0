//! Confidence estimation for predicted frames.
//!
//! Three target-side features are extracted from each prediction:
//!
//! * `length`: number of predicted tokens;
//! * `validity`: `max(0, opens - closes)` over the predicted tokens;
//! * `confidence`: mean per-token probability.
//!
//! A linear classifier is trained on z-scored features with a class-weighted
//! hinge loss (class weight `n / (2 * n_k)`), optimized by full-batch
//! subgradient descent. The reported score is the sigmoid of the margin; the
//! label is positive (frame judged correct) when the margin exceeds the
//! threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame::{FrameError, TokenSeq};
use crate::record::PredictionRecord;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Features with a standard deviation at or below this are treated as constant.
const CONSTANT_STD: f64 = 1e-12;
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfidenceError {
    #[error("token_probs has {probs} values for {tokens} predicted tokens")]
    ProbLengthMismatch { probs: usize, tokens: usize },
    #[error("prediction does not tokenize: {0}")]
    Frame(#[from] FrameError),
    #[error("training data needs both correct and incorrect frames")]
    SingleClassCorpus,
    #[error("need at least {min} training records, got {got}")]
    TooFewRecords { min: usize, got: usize },
    #[error("every active feature is constant on the training data")]
    DegenerateFeatures,
    #[error("feature mask {got} does not match the model's {expected}")]
    MaskMismatch { expected: FeatureMask, got: FeatureMask },
    #[error("unsupported model schema version {0}")]
    SchemaVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Length,
    Validity,
    Confidence,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Length, Feature::Validity, Feature::Confidence];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Length => "length",
            Feature::Validity => "validity",
            Feature::Confidence => "confidence",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature {s:?} (expected length, validity or confidence)"))
    }
}

/// Which features take part in training and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Feature>", from = "Vec<Feature>")]
pub struct FeatureMask([bool; 3]);

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask([true; 3]);

    pub fn contains(self, f: Feature) -> bool {
        self.0[f.index()]
    }

    pub fn without(mut self, f: Feature) -> Self {
        self.0[f.index()] = false;
        self
    }

    pub fn active(self) -> Vec<Feature> {
        Feature::ALL.into_iter().filter(|f| self.contains(*f)).collect()
    }
}

impl From<Vec<Feature>> for FeatureMask {
    fn from(features: Vec<Feature>) -> Self {
        let mut mask = FeatureMask([false; 3]);
        for f in features {
            mask.0[f.index()] = true;
        }
        mask
    }
}

impl From<FeatureMask> for Vec<Feature> {
    fn from(mask: FeatureMask) -> Self {
        mask.active()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.active().into_iter().map(Feature::name).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub length: f64,
    pub validity: f64,
    pub confidence: f64,
    pub mask: FeatureMask,
}

impl FeatureVector {
    pub fn new(length: f64, validity: f64, confidence: f64, mask: FeatureMask) -> Self {
        FeatureVector {
            length,
            validity,
            confidence,
            mask: FeatureMask::ALL,
        }
        .with_mask(mask)
    }

    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Length => self.length,
            Feature::Validity => self.validity,
            Feature::Confidence => self.confidence,
        }
    }

    /// Narrows the mask and zeroes the dropped features. Features already
    /// masked out stay zero.
    pub fn with_mask(mut self, mask: FeatureMask) -> Self {
        for f in Feature::ALL {
            if !mask.contains(f) {
                match f {
                    Feature::Length => self.length = 0.0,
                    Feature::Validity => self.validity = 0.0,
                    Feature::Confidence => self.confidence = 0.0,
                }
            }
        }
        self.mask = mask;
        self
    }
}

/// Features of a tokenized prediction. `probs` is only required when the
/// confidence feature is active.
pub fn features_of(pred: &TokenSeq, probs: Option<&[f64]>, mask: FeatureMask) -> Result<FeatureVector, ConfidenceError> {
    let length = pred.len();
    let validity = pred.open_count().saturating_sub(pred.close_count());
    let confidence = if mask.contains(Feature::Confidence) {
        let probs = probs.unwrap_or(&[]);
        if probs.len() != length {
            return Err(ConfidenceError::ProbLengthMismatch {
                probs: probs.len(),
                tokens: length,
            });
        }
        probs.iter().sum::<f64>() / length as f64
    } else {
        0.0
    };
    Ok(FeatureVector::new(length as f64, validity as f64, confidence, mask))
}

pub fn extract_features(record: &PredictionRecord, mask: FeatureMask) -> Result<FeatureVector, ConfidenceError> {
    features_of(&record.pred_seq()?, record.token_probs.as_deref(), mask)
}

/// A feature vector with its gold label (`true` = the frame is correct).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: FeatureVector,
    pub correct: bool,
}

/// Extracts features and labels each record by exact match with its gold frame.
pub fn label_records(records: &[PredictionRecord], mask: FeatureMask) -> Result<Vec<Example>, ConfidenceError> {
    records
        .iter()
        .map(|r| {
            Ok(Example {
                features: extract_features(r, mask)?,
                correct: r.is_exact_match(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial step size; epoch `t` uses `step_size / sqrt(t)`.
    pub step_size: f64,
    /// L2 penalty on the weights.
    pub lambda: f64,
    /// Recorded for provenance. Full-batch descent from zero weights does not
    /// consume randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            step_size: 1.0,
            lambda: 1e-3,
            seed: 0,
        }
    }
}

pub const MIN_TRAINING_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl ClassWeights {
    /// Inverse-frequency weights `n / (2 * n_k)`.
    pub fn balanced(positives: usize, negatives: usize) -> Self {
        let total = (positives + negatives) as f64;
        ClassWeights {
            positive: total / (2.0 * positives as f64),
            negative: total / (2.0 * negatives as f64),
        }
    }

    fn of(&self, correct: bool) -> f64 {
        if correct {
            self.positive
        } else {
            self.negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
    /// Constant on the training split; dropped from the margin.
    pub constant: bool,
}

impl Normalization {
    fn apply(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub schema_version: u32,
    /// Active features, in the order of `weights` and `normalization`.
    pub features: Vec<Feature>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub normalization: Vec<Normalization>,
    pub class_weights: ClassWeights,
    pub config: TrainConfig,
    pub threshold: f64,
    pub training_examples: usize,
    pub training_fingerprint: String,
    pub final_loss: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub margin: f64,
    /// `sigmoid(margin)`, the estimated probability that the frame is correct.
    pub score: f64,
    pub correct: bool,
}

impl LinearModel {
    pub fn mask(&self) -> FeatureMask {
        FeatureMask::from(self.features.clone())
    }

    fn normalized(&self, fv: &FeatureVector) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.normalization)
            .map(|(f, n)| n.apply(fv.get(*f)))
            .collect()
    }

    pub fn margin(&self, fv: &FeatureVector) -> Result<f64, ConfidenceError> {
        let expected = self.mask();
        if fv.mask != expected {
            return Err(ConfidenceError::MaskMismatch { expected, got: fv.mask });
        }
        Ok(margin_of(&self.weights, self.bias, &self.normalized(fv)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let model: LinearModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ConfidenceError::SchemaVersion(model.schema_version).to_string());
        }
        let k = model.features.len();
        if model.weights.len() != k || model.normalization.len() != k {
            return Err("weights and normalization must have one entry per feature".to_owned());
        }
        Ok(model)
    }
}

fn margin_of(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
}

pub fn predict(model: &LinearModel, fv: &FeatureVector) -> Result<Prediction, ConfidenceError> {
    let margin = model.margin(fv)?;
    Ok(Prediction {
        margin,
        score: sigmoid(margin),
        correct: margin > model.threshold,
    })
}

fn fingerprint(examples: &[Example]) -> String {
    let mut hasher = Sha256::new();
    for ex in examples {
        for f in Feature::ALL {
            hasher.update([u8::from(ex.features.mask.contains(f))]);
            hasher.update(ex.features.get(f).to_bits().to_le_bytes());
        }
        hasher.update([u8::from(ex.correct)]);
    }
    hex::encode(hasher.finalize())
}

struct Problem<'a> {
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    class_weights: ClassWeights,
    /// Non-constant columns of the active features.
    live: &'a [bool],
    lambda: f64,
}

impl Problem<'_> {
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.rows.len() as f64;
        let hinge: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let sign = if y { 1.0 } else { -1.0 };
                self.class_weights.of(y) * (1.0 - sign * margin_of(w, b, x)).max(0.0)
            })
            .sum();
        hinge / n + self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn subgradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut gw: Vec<f64> = w.iter().map(|v| 2.0 * self.lambda * v).collect();
        let mut gb = 0.0;
        for (x, &y) in self.rows.iter().zip(&self.labels) {
            let sign = if y { 1.0 } else { -1.0 };
            if sign * margin_of(w, b, x) < 1.0 {
                let c = self.class_weights.of(y) * sign / n;
                for (g, v) in gw.iter_mut().zip(x) {
                    *g -= c * v;
                }
                gb -= c;
            }
        }
        for (g, live) in gw.iter_mut().zip(self.live) {
            if !live {
                *g = 0.0;
            }
        }
        (gw, gb)
    }
}

/// Trains on `examples`, which must all share one feature mask. Returns the
/// model and the objective after each epoch (index 0 is the starting point).
///
/// A step that would raise the objective is halved until it does not, so
/// the recorded losses never increase.
pub fn train_with_history(examples: &[Example], config: &TrainConfig) -> Result<(LinearModel, Vec<f64>), ConfidenceError> {
    if examples.len() < MIN_TRAINING_RECORDS {
        return Err(ConfidenceError::TooFewRecords {
            min: MIN_TRAINING_RECORDS,
            got: examples.len(),
        });
    }
    let mask = examples[0].features.mask;
    if let Some(other) = examples.iter().find(|e| e.features.mask != mask) {
        return Err(ConfidenceError::MaskMismatch {
            expected: mask,
            got: other.features.mask,
        });
    }
    let positives = examples.iter().filter(|e| e.correct).count();
    let negatives = examples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ConfidenceError::SingleClassCorpus);
    }

    let features = mask.active();
    let n = examples.len() as f64;
    let normalization: Vec<Normalization> = features
        .iter()
        .map(|f| {
            let mean = examples.iter().map(|e| e.features.get(*f)).sum::<f64>() / n;
            let var = examples
                .iter()
                .map(|e| (e.features.get(*f) - mean).powi(2))
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            Normalization {
                mean,
                std: if std > CONSTANT_STD { std } else { 1.0 },
                constant: std <= CONSTANT_STD,
            }
        })
        .collect();
    let live: Vec<bool> = normalization.iter().map(|n| !n.constant).collect();
    if !live.iter().any(|l| *l) {
        return Err(ConfidenceError::DegenerateFeatures);
    }

    let problem = Problem {
        rows: examples
            .iter()
            .map(|e| {
                features
                    .iter()
                    .zip(&normalization)
                    .map(|(f, n)| n.apply(e.features.get(*f)))
                    .collect()
            })
            .collect(),
        labels: examples.iter().map(|e| e.correct).collect(),
        class_weights: ClassWeights::balanced(positives, negatives),
        live: &live,
        lambda: config.lambda,
    };

    let mut w = vec![0.0; features.len()];
    let mut b = 0.0;
    let mut loss = problem.objective(&w, b);
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(loss);
    for t in 1..=config.epochs {
        let (gw, gb) = problem.subgradient(&w, b);
        let mut step = config.step_size / (t as f64).sqrt();
        for _ in 0..MAX_BACKTRACK {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
            let cand_b = b - step * gb;
            let cand_loss = problem.objective(&cand_w, cand_b);
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
    }

    let model = LinearModel {
        schema_version: MODEL_SCHEMA_VERSION,
        features,
        weights: w,
        bias: b,
        normalization,
        class_weights: problem.class_weights,
        config: config.clone(),
        threshold: 0.0,
        training_examples: examples.len(),
        training_fingerprint: fingerprint(examples),
        final_loss: loss,
    };
    Ok((model, history))
}

pub fn train(examples: &[Example], config: &TrainConfig) -> Result<LinearModel, ConfidenceError> {
    train_with_history(examples, config).map(|(model, _)| model)
}

/// Mean class-weighted hinge loss without the penalty term.
pub fn hinge_loss(model: &LinearModel, examples: &[Example]) -> Result<f64, ConfidenceError> {
    let mut total = 0.0;
    for ex in examples {
        let sign = if ex.correct { 1.0 } else { -1.0 };
        total += model.class_weights.of(ex.correct) * (1.0 - sign * model.margin(&ex.features)?).max(0.0);
    }
    Ok(total / examples.len() as f64)
}

/// Precision, recall and F1 of the positive (correct-frame) class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    /// False when nothing was predicted positive; precision is then reported as 0.
    pub precision_defined: bool,
    /// False when there are no positive examples; recall is then reported as 0.
    pub recall_defined: bool,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
            precision_defined: tp + fp > 0,
            recall_defined: tp + fn_ > 0,
        }
    }

    pub fn support(&self) -> usize {
        self.true_positives + self.false_negatives
    }
}

/// Margins equal to the threshold count as negative.
pub fn evaluate(model: &LinearModel, examples: &[Example]) -> Result<Prf, ConfidenceError> {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for ex in examples {
        match (predict(model, &ex.features)?.correct, ex.correct) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_, tn))
}

/// Picks the threshold that maximizes F1 on `examples` among the midpoints
/// between consecutive distinct margins and 0. Ties go to the threshold
/// closest to 0.
pub fn tune_threshold(model: &LinearModel, examples: &[Example]) -> Result<f64, ConfidenceError> {
    let mut margins: Vec<f64> = examples
        .iter()
        .map(|e| model.margin(&e.features))
        .collect::<Result<_, _>>()?;
    margins.sort_by(f64::total_cmp);
    margins.dedup();
    let mut candidates = vec![0.0];
    candidates.extend(margins.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let f1_at = |threshold: f64| {
        let mut probe = model.clone();
        probe.threshold = threshold;
        evaluate(&probe, examples).map(|prf| prf.f1)
    };
    let mut best: (f64, f64) = (0.0, f1_at(0.0)?);
    for &t in &candidates[1..] {
        let f1 = f1_at(t)?;
        if f1 > best.1 || (f1 == best.1 && t.abs() < best.0.abs()) {
            best = (t, f1);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` for the full model.
    pub dropped: Option<Feature>,
    pub prf: Prf,
}

impl AblationRow {
    pub fn name(&self) -> String {
        match self.dropped {
            None => "SVM".to_owned(),
            Some(f) => format!("--{f}"),
        }
    }
}

/// Retrains from scratch with each feature removed from both splits. Rows:
/// full model, then `--length`, `--validity`, `--confidence`.
pub fn ablate(train_set: &[Example], test_set: &[Example], config: &TrainConfig) -> Result<Vec<AblationRow>, ConfidenceError> {
    let variants = std::iter::once(None).chain(Feature::ALL.into_iter().map(Some));
    variants
        .map(|dropped| {
            let mask = match dropped {
                None => FeatureMask::ALL,
                Some(f) => FeatureMask::ALL.without(f),
            };
            let remask = |set: &[Example]| -> Vec<Example> {
                set.iter()
                    .map(|e| Example {
                        features: e.features.with_mask(mask),
                        correct: e.correct,
                    })
                    .collect()
            };
            let model = train(&remask(train_set), config)?;
            let prf = evaluate(&model, &remask(test_set))?;
            Ok(AblationRow { dropped, prf })
        })
        .collect()
}
