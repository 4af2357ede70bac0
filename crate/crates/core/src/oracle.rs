//! Span-oracle and structure-oracle training pairs.
//!
//! Both oracles append a partially gold snippet to the utterance, separated
//! by the reserved `[sep]` token. The span oracle snippet lists the gold leaf
//! spans behind numbered markers:
//!
//! ```text
//! [span1] fireworks [span2] tonight
//! ```
//!
//! The structure oracle snippet is the full labelled frame with each
//! non-empty leaf span replaced by its marker:
//!
//! ```text
//! [IN:GET_EVENT [SL:CAT [span1] ] [SL:DATE [span2] ] ]
//! ```
//!
//! The target is always the complete gold frame.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{self, FrameError, FrameToken, FrameTree, Label, SlotContent, TokenSeq};

pub const SEPARATOR: &str = "[sep]";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("span markers do not match the spans: {0}")]
    MarkerMismatch(String),
}

pub fn marker(index: usize) -> String {
    format!("[span{index}]")
}

/// Parses `[spanK]` into `K` (K ≥ 1).
pub fn parse_marker(token: &str) -> Option<usize> {
    let digits = token.strip_prefix("[span")?.strip_suffix(']')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafSpan {
    /// 1-based, left to right.
    pub index: usize,
    pub tokens: Vec<String>,
    pub slot_label: Label,
}

/// Non-empty leaf spans in serialization order.
pub fn extract_leaf_spans(tree: &FrameTree) -> Vec<LeafSpan> {
    tree.slots_in_order()
        .into_iter()
        .filter_map(|slot| match &slot.content {
            SlotContent::Leaf(span) if !span.is_empty() => Some((slot.label.clone(), span.clone())),
            _ => None,
        })
        .enumerate()
        .map(|(i, (slot_label, tokens))| LeafSpan {
            index: i + 1,
            tokens,
            slot_label,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Span,
    Struct,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Span => "span",
            OracleKind::Struct => "struct",
        })
    }
}

impl FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "span" => Ok(OracleKind::Span),
            "struct" => Ok(OracleKind::Struct),
            _ => Err(format!("unknown oracle kind {s:?}")),
        }
    }
}

/// Field order matches the JSONL output: source, target, kind, snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OraclePair {
    pub source: String,
    pub target: String,
    pub kind: OracleKind,
    pub snippet: String,
}

impl OraclePair {
    fn new(kind: OracleKind, utterance: &str, snippet: String, frame: &TokenSeq) -> Self {
        let utterance = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
        let source = if snippet.is_empty() {
            format!("{utterance} {SEPARATOR}")
        } else {
            format!("{utterance} {SEPARATOR} {snippet}")
        };
        OraclePair {
            source,
            target: frame.to_string(),
            kind,
            snippet,
        }
    }

    pub fn to_tsv_line(&self) -> String {
        format!("{}\t{}", self.source, self.target)
    }
}

fn check_reserved(frame: &TokenSeq) -> Result<(), OracleError> {
    match frame
        .iter()
        .filter_map(FrameToken::text)
        .find(|t| *t == SEPARATOR || parse_marker(t).is_some())
    {
        Some(t) => Err(OracleError::MarkerMismatch(format!("frame copies reserved token {t}"))),
        None => Ok(()),
    }
}

pub fn build_span_oracle(utterance: &str, frame: &TokenSeq) -> Result<OraclePair, OracleError> {
    let tree = frame::parse(frame)?;
    check_reserved(frame)?;
    let mut parts = Vec::new();
    for span in extract_leaf_spans(&tree) {
        parts.push(marker(span.index));
        parts.extend(span.tokens);
    }
    Ok(OraclePair::new(OracleKind::Span, utterance, parts.join(" "), frame))
}

pub fn build_struct_oracle(utterance: &str, frame: &TokenSeq) -> Result<OraclePair, OracleError> {
    frame::parse(frame)?;
    check_reserved(frame)?;
    // In a schema-valid frame every run of copied tokens is exactly one leaf span.
    let mut parts: Vec<String> = Vec::with_capacity(frame.len());
    let mut next = 1;
    let mut in_run = false;
    for tok in frame {
        match tok {
            FrameToken::Copy(_) if in_run => {}
            FrameToken::Copy(_) => {
                parts.push(marker(next));
                next += 1;
                in_run = true;
            }
            other => {
                parts.push(other.to_string());
                in_run = false;
            }
        }
    }
    Ok(OraclePair::new(OracleKind::Struct, utterance, parts.join(" "), frame))
}

pub fn build_oracle(kind: OracleKind, utterance: &str, frame: &TokenSeq) -> Result<OraclePair, OracleError> {
    match kind {
        OracleKind::Span => build_span_oracle(utterance, frame),
        OracleKind::Struct => build_struct_oracle(utterance, frame),
    }
}

/// Substitutes each `[spanK]` marker in a structure snippet with the tokens of
/// the span whose index is K.
pub fn reconstruct(struct_snippet: &str, spans: &[LeafSpan]) -> Result<TokenSeq, OracleError> {
    let mismatch = |msg: String| Err(OracleError::MarkerMismatch(msg));
    let mut seen = vec![false; spans.len()];
    let mut units: Vec<&str> = Vec::new();
    for unit in struct_snippet.split_whitespace() {
        let Some(k) = parse_marker(unit) else {
            units.push(unit);
            continue;
        };
        let Some(pos) = spans.iter().position(|s| s.index == k) else {
            return mismatch(format!("marker {unit} has no span"));
        };
        if std::mem::replace(&mut seen[pos], true) {
            return mismatch(format!("marker {unit} appears more than once"));
        }
        units.extend(spans[pos].tokens.iter().map(String::as_str));
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        return mismatch(format!("no marker for span {}", spans[pos].index));
    }
    Ok(frame::tokenize(&units.join(" "))?)
}
