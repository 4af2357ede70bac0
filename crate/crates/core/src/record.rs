//! Prediction records: one model output per line of a JSONL file.

use serde::{Deserialize, Serialize};

use crate::frame::{self, FrameError, TokenSeq};
use crate::taxonomy::ErrorType;

pub const PREDICTION_SCHEMA_VERSION: u32 = 1;

/// One dataset line: an utterance, its canonical gold frame and optional tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub utterance: String,
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl DatasetEntry {
    pub fn new(utterance: impl Into<String>, frame: impl Into<String>) -> Self {
        DatasetEntry {
            utterance: utterance.into(),
            frame: frame.into(),
            language: None,
            domain: None,
        }
    }

    pub fn frame_seq(&self) -> Result<TokenSeq, FrameError> {
        frame::tokenize(&self.frame)
    }
}

/// One model output. Frames are stored as canonical text; `token_probs`
/// aligns with the whitespace tokens of `pred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub utterance: String,
    pub gold: String,
    pub pred: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_pred: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Set on synthetic records produced by the perturbation engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_type: Option<ErrorType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_edit: Option<String>,
}

fn default_schema_version() -> u32 {
    PREDICTION_SCHEMA_VERSION
}

impl PredictionRecord {
    pub fn new(utterance: impl Into<String>, gold: impl Into<String>, pred: impl Into<String>) -> Self {
        PredictionRecord {
            schema_version: PREDICTION_SCHEMA_VERSION,
            utterance: utterance.into(),
            gold: gold.into(),
            pred: pred.into(),
            token_probs: None,
            forced_pred: None,
            language: None,
            domain: None,
            injected_type: None,
            injected_position: None,
            injected_edit: None,
        }
    }

    pub fn with_probs(mut self, probs: Vec<f64>) -> Self {
        self.token_probs = Some(probs);
        self
    }

    pub fn gold_seq(&self) -> Result<TokenSeq, FrameError> {
        frame::tokenize(&self.gold)
    }

    pub fn pred_seq(&self) -> Result<TokenSeq, FrameError> {
        frame::tokenize(&self.pred)
    }

    pub fn forced_seq(&self) -> Option<Result<TokenSeq, FrameError>> {
        self.forced_pred.as_deref().map(frame::tokenize)
    }

    pub fn is_exact_match(&self) -> bool {
        frame::exact_match_text(&self.pred, &self.gold)
    }

    /// Checks the record invariants and returns the reason for the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != PREDICTION_SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        let gold = self.gold_seq().map_err(|e| format!("gold: {e}"))?;
        frame::parse(&gold).map_err(|e| format!("gold: {e}"))?;
        let pred = self.pred_seq().map_err(|e| format!("pred: {e}"))?;
        if let Some(Err(e)) = self.forced_seq() {
            return Err(format!("forced_pred: {e}"));
        }
        if let Some(probs) = &self.token_probs {
            if probs.len() != pred.len() {
                return Err(format!(
                    "token_probs has {} values for {} pred tokens",
                    probs.len(),
                    pred.len()
                ));
            }
            if let Some((i, p)) = probs
                .iter()
                .enumerate()
                .find(|(_, p)| !(**p > 0.0 && **p <= 1.0))
            {
                return Err(format!("token_probs[{i}] = {p} is outside (0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_each_invariant() {
        let ok = PredictionRecord::new("hi", "[IN:X ]", "[IN:X ]").with_probs(vec![0.5, 1.0]);
        assert!(ok.validate().is_ok());

        let bad_gold = PredictionRecord::new("hi", "[IN:X", "[IN:X ]");
        assert!(bad_gold.validate().unwrap_err().starts_with("gold"));

        let bad_pred = PredictionRecord::new("hi", "[IN:X ]", "[IN: ]");
        assert!(bad_pred.validate().unwrap_err().starts_with("pred"));

        let short = ok.clone().with_probs(vec![0.5]);
        assert!(short.validate().unwrap_err().contains("token_probs has 1"));

        let zero = ok.clone().with_probs(vec![0.0, 0.5]);
        assert!(zero.validate().unwrap_err().contains("outside"));

        let mut forced = ok.clone();
        forced.forced_pred = Some("[SL:".into());
        assert!(forced.validate().unwrap_err().starts_with("forced_pred"));
    }

    #[test]
    fn unbalanced_pred_is_a_valid_record() {
        let r = PredictionRecord::new("hi", "[IN:X ]", "[IN:X");
        assert!(r.validate().is_ok());
        assert!(!r.is_exact_match());
    }

    #[test]
    fn json_omits_absent_fields() {
        let r = PredictionRecord::new("hi", "[IN:X ]", "[IN:X ]");
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"schema_version":1,"utterance":"hi","gold":"[IN:X ]","pred":"[IN:X ]"}"#
        );
        let back: PredictionRecord =
            serde_json::from_str(r#"{"utterance":"hi","gold":"[IN:X ]","pred":"[IN:X ]"}"#).unwrap();
        assert_eq!(back, r);
    }
}
