//! Linearized decoupled semantic frames.
//!
//! A frame is a whitespace-separated sequence of four token kinds:
//! `[IN:LABEL` opens an intent, `[SL:LABEL` opens a slot, `]` closes the
//! innermost open node, and anything else is a token copied from the
//! utterance. For example:
//!
//! ```text
//! [IN:GET_DIRECTIONS [SL:DESTINATION [IN:GET_EVENT [SL:NAME_EVENT Warriors ] [SL:CAT_EVENT game ] ] ] ]
//! ```
//!
//! Two levels of validity are distinguished. *Bracket balance* (the tree
//! validity metric) only looks at open and close counts. *Schema validity*
//! additionally requires an intent root, intent/slot alternation, and copied
//! tokens appearing only inside leaf slots.
//!
//! Depth counts both intent and slot nesting: a bare intent has depth 1, the
//! frame above has depth 4.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const INTENT_PREFIX: &str = "[IN:";
pub const SLOT_PREFIX: &str = "[SL:";
pub const CLOSE: &str = "]";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("empty frame text")]
    EmptyInput,
    #[error("malformed bracket token {token:?} at index {index}")]
    MalformedBracketToken { index: usize, token: String },
    #[error("frame is not schema-valid at token {index}: {reason}")]
    NotSchemaValid { index: usize, reason: &'static str },
}

/// An ontology label. Non-empty, no whitespace, no bracket characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    pub fn new(label: impl Into<String>) -> Result<Self, String> {
        let label = label.into();
        if label.is_empty() {
            return Err("empty label".to_owned());
        }
        if label.chars().any(|c| c.is_whitespace() || c == '[' || c == ']') {
            return Err(format!("label {label:?} contains whitespace or brackets"));
        }
        Ok(Label(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Label {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Label::new(value)
    }
}

impl From<Label> for String {
    fn from(label: Label) -> Self {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    OpenIntent,
    OpenSlot,
    Close,
    Copy,
}

impl TokenKind {
    pub fn is_open(self) -> bool {
        matches!(self, TokenKind::OpenIntent | TokenKind::OpenSlot)
    }
}

/// One unit of a linearized frame.
///
/// Copy text is compared byte-for-byte; no Unicode normalization is applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FrameToken {
    OpenIntent(Label),
    OpenSlot(Label),
    Close,
    Copy(String),
}

impl FrameToken {
    pub fn kind(&self) -> TokenKind {
        match self {
            FrameToken::OpenIntent(_) => TokenKind::OpenIntent,
            FrameToken::OpenSlot(_) => TokenKind::OpenSlot,
            FrameToken::Close => TokenKind::Close,
            FrameToken::Copy(_) => TokenKind::Copy,
        }
    }

    pub fn label(&self) -> Option<&Label> {
        match self {
            FrameToken::OpenIntent(l) | FrameToken::OpenSlot(l) => Some(l),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            FrameToken::Copy(t) => Some(t),
            _ => None,
        }
    }

    pub fn intent(label: &str) -> Self {
        FrameToken::OpenIntent(Label::new(label).expect("valid label"))
    }

    pub fn slot(label: &str) -> Self {
        FrameToken::OpenSlot(Label::new(label).expect("valid label"))
    }

    pub fn copy(text: &str) -> Self {
        FrameToken::Copy(text.to_owned())
    }
}

impl fmt::Display for FrameToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameToken::OpenIntent(l) => write!(f, "{INTENT_PREFIX}{l}"),
            FrameToken::OpenSlot(l) => write!(f, "{SLOT_PREFIX}{l}"),
            FrameToken::Close => f.write_str(CLOSE),
            FrameToken::Copy(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizeOptions {
    /// Accept `[in:x` / `[sl:x` and upper-case their labels.
    pub case_insensitive: bool,
}

fn lex_unit(index: usize, unit: &str, opts: TokenizeOptions) -> Result<FrameToken, FrameError> {
    if unit == CLOSE {
        return Ok(FrameToken::Close);
    }
    let malformed = || FrameError::MalformedBracketToken {
        index,
        token: unit.to_owned(),
    };
    let head = unit.get(..INTENT_PREFIX.len());
    let is = |prefix: &str| match head {
        Some(h) if opts.case_insensitive => h.eq_ignore_ascii_case(prefix),
        Some(h) => h == prefix,
        None => false,
    };
    let make_label = |rest: &str| {
        let rest = if opts.case_insensitive {
            rest.to_uppercase()
        } else {
            rest.to_owned()
        };
        Label::new(rest).map_err(|_| malformed())
    };
    if is(INTENT_PREFIX) {
        make_label(&unit[INTENT_PREFIX.len()..]).map(FrameToken::OpenIntent)
    } else if is(SLOT_PREFIX) {
        make_label(&unit[SLOT_PREFIX.len()..]).map(FrameToken::OpenSlot)
    } else {
        Ok(FrameToken::Copy(unit.to_owned()))
    }
}

pub fn tokenize(text: &str) -> Result<TokenSeq, FrameError> {
    tokenize_with(text, TokenizeOptions::default())
}

pub fn tokenize_with(text: &str, opts: TokenizeOptions) -> Result<TokenSeq, FrameError> {
    let tokens = text
        .split_whitespace()
        .enumerate()
        .map(|(i, unit)| lex_unit(i, unit, opts))
        .collect::<Result<Vec<_>, _>>()?;
    if tokens.is_empty() {
        return Err(FrameError::EmptyInput);
    }
    Ok(TokenSeq(tokens))
}

/// An ordered sequence of frame tokens. `Display` produces canonical text
/// (single spaces) that tokenizes back to the same sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(pub Vec<FrameToken>);

impl TokenSeq {
    pub fn new(tokens: Vec<FrameToken>) -> Self {
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[FrameToken] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FrameToken> {
        self.0.iter()
    }

    pub fn open_count(&self) -> usize {
        self.0.iter().filter(|t| t.kind().is_open()).count()
    }

    pub fn close_count(&self) -> usize {
        self.0.iter().filter(|t| t.kind() == TokenKind::Close).count()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tok}")?;
        }
        Ok(())
    }
}

impl FromStr for TokenSeq {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        tokenize(s)
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a FrameToken;
    type IntoIter = std::slice::Iter<'a, FrameToken>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentNode {
    pub label: Label,
    pub slots: Vec<SlotNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotContent {
    Intents(Vec<IntentNode>),
    /// Copied tokens; may be empty.
    Leaf(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotNode {
    pub label: Label,
    pub content: SlotContent,
}

impl SlotNode {
    pub fn leaf_span(&self) -> Option<&[String]> {
        match &self.content {
            SlotContent::Leaf(span) => Some(span),
            SlotContent::Intents(_) => None,
        }
    }
}

/// A schema-valid frame tree rooted at an intent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTree {
    pub root: IntentNode,
}

impl FrameTree {
    pub fn depth(&self) -> usize {
        fn intent_depth(node: &IntentNode) -> usize {
            1 + node.slots.iter().map(slot_depth).max().unwrap_or(0)
        }
        fn slot_depth(node: &SlotNode) -> usize {
            1 + match &node.content {
                SlotContent::Intents(children) => {
                    children.iter().map(intent_depth).max().unwrap_or(0)
                }
                SlotContent::Leaf(_) => 0,
            }
        }
        intent_depth(&self.root)
    }

    pub fn to_tokens(&self) -> TokenSeq {
        fn emit_intent(node: &IntentNode, out: &mut Vec<FrameToken>) {
            out.push(FrameToken::OpenIntent(node.label.clone()));
            for slot in &node.slots {
                out.push(FrameToken::OpenSlot(slot.label.clone()));
                match &slot.content {
                    SlotContent::Intents(children) => {
                        for child in children {
                            emit_intent(child, out);
                        }
                    }
                    SlotContent::Leaf(span) => {
                        out.extend(span.iter().map(|t| FrameToken::Copy(t.clone())));
                    }
                }
                out.push(FrameToken::Close);
            }
            out.push(FrameToken::Close);
        }
        let mut out = Vec::new();
        emit_intent(&self.root, &mut out);
        TokenSeq(out)
    }

    /// Slots in left-to-right serialization order.
    pub fn slots_in_order(&self) -> Vec<&SlotNode> {
        fn walk<'a>(node: &'a IntentNode, out: &mut Vec<&'a SlotNode>) {
            for slot in &node.slots {
                out.push(slot);
                if let SlotContent::Intents(children) = &slot.content {
                    for child in children {
                        walk(child, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

pub fn serialize(tree: &FrameTree) -> String {
    tree.to_tokens().to_string()
}

pub fn depth(tree: &FrameTree) -> usize {
    tree.depth()
}

enum Open {
    Intent(IntentNode),
    Slot {
        label: Label,
        intents: Vec<IntentNode>,
        leaf: Vec<String>,
    },
}

/// Rebuilds the tree with an explicit stack. Fails at the first token that
/// breaks the schema; a missing close is reported at index `seq.len()`.
pub fn parse(seq: &TokenSeq) -> Result<FrameTree, FrameError> {
    let bad = |index, reason| FrameError::NotSchemaValid { index, reason };
    let tokens = seq.tokens();
    match tokens.first() {
        None => return Err(bad(0, "empty sequence")),
        Some(FrameToken::OpenIntent(_)) => {}
        Some(_) => return Err(bad(0, "root must be an intent")),
    }

    let mut stack: Vec<Open> = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        match tok {
            FrameToken::OpenIntent(label) => {
                match stack.last() {
                    None => {}
                    Some(Open::Slot { leaf, .. }) if leaf.is_empty() => {}
                    Some(Open::Slot { .. }) => {
                        return Err(bad(i, "intent inside a slot that already holds copied tokens"))
                    }
                    Some(Open::Intent(_)) => return Err(bad(i, "intent directly under an intent")),
                }
                stack.push(Open::Intent(IntentNode {
                    label: label.clone(),
                    slots: Vec::new(),
                }));
            }
            FrameToken::OpenSlot(label) => {
                if !matches!(stack.last(), Some(Open::Intent(_))) {
                    return Err(bad(i, "slot outside an intent"));
                }
                stack.push(Open::Slot {
                    label: label.clone(),
                    intents: Vec::new(),
                    leaf: Vec::new(),
                });
            }
            FrameToken::Copy(text) => match stack.last_mut() {
                Some(Open::Slot { intents, leaf, .. }) if intents.is_empty() => {
                    leaf.push(text.clone())
                }
                Some(Open::Slot { .. }) => {
                    return Err(bad(i, "copied token inside a slot that holds intents"))
                }
                _ => return Err(bad(i, "copied token outside a slot")),
            },
            FrameToken::Close => {
                let finished = stack.pop().expect("stack non-empty inside the root");
                match finished {
                    Open::Intent(node) => match stack.last_mut() {
                        None => {
                            if i + 1 != tokens.len() {
                                return Err(bad(i + 1, "tokens after the root intent closed"));
                            }
                            return Ok(FrameTree { root: node });
                        }
                        Some(Open::Slot { intents, .. }) => intents.push(node),
                        Some(Open::Intent(_)) => unreachable!("intents never nest directly"),
                    },
                    Open::Slot { label, intents, leaf } => {
                        let content = if intents.is_empty() {
                            SlotContent::Leaf(leaf)
                        } else {
                            SlotContent::Intents(intents)
                        };
                        match stack.last_mut() {
                            Some(Open::Intent(parent)) => {
                                parent.slots.push(SlotNode { label, content })
                            }
                            _ => unreachable!("slots only open under intents"),
                        }
                    }
                }
            }
        }
    }
    Err(bad(tokens.len(), "unclosed brackets at end of input"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub open_count: usize,
    pub close_count: usize,
    pub balanced: bool,
    /// No prefix has more closes than opens.
    pub prefix_legal: bool,
    pub schema_valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

pub fn check_validity(seq: &TokenSeq) -> ValidityReport {
    let mut open_count = 0;
    let mut close_count = 0;
    let mut prefix_legal = true;
    for tok in seq {
        match tok.kind() {
            TokenKind::OpenIntent | TokenKind::OpenSlot => open_count += 1,
            TokenKind::Close => {
                close_count += 1;
                if close_count > open_count {
                    prefix_legal = false;
                }
            }
            TokenKind::Copy => {}
        }
    }
    let balanced = prefix_legal && open_count == close_count;
    let depth = parse(seq).ok().map(|tree| tree.depth());
    ValidityReport {
        open_count,
        close_count,
        balanced,
        prefix_legal,
        schema_valid: depth.is_some(),
        depth,
    }
}

/// Token-for-token equality. Sequences are already whitespace-canonical, so
/// there is no credit for tree-equivalent reorderings.
pub fn exact_match(pred: &TokenSeq, gold: &TokenSeq) -> bool {
    pred == gold
}

/// Exact match on raw frame text after collapsing whitespace.
pub fn exact_match_text(pred: &str, gold: &str) -> bool {
    pred.split_whitespace().eq(gold.split_whitespace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSeq {
        tokenize(s).unwrap()
    }

    #[test]
    fn tokenize_kinds() {
        let got = seq("[IN:GET_EVENT [SL:DATE tonight ] ]");
        assert_eq!(
            got.tokens(),
            &[
                FrameToken::intent("GET_EVENT"),
                FrameToken::slot("DATE"),
                FrameToken::copy("tonight"),
                FrameToken::Close,
                FrameToken::Close,
            ]
        );
        assert_eq!(seq("]").tokens(), &[FrameToken::Close]);
    }

    #[test]
    fn tokenize_errors() {
        assert_eq!(tokenize("   \t"), Err(FrameError::EmptyInput));
        assert_eq!(
            tokenize("[IN:"),
            Err(FrameError::MalformedBracketToken {
                index: 0,
                token: "[IN:".into()
            })
        );
        assert!(matches!(
            tokenize("[IN:X [SL:A] ]"),
            Err(FrameError::MalformedBracketToken { index: 1, .. })
        ));
    }

    #[test]
    fn tokenize_case_handling() {
        // lowercase prefixes are copy tokens unless the compatibility flag is set
        assert_eq!(seq("[in:x").tokens(), &[FrameToken::copy("[in:x")]);
        let opts = TokenizeOptions {
            case_insensitive: true,
        };
        let got = tokenize_with("[in:unsupported-event ]", opts).unwrap();
        assert_eq!(got.to_string(), "[IN:UNSUPPORTED-EVENT ]");
        assert_eq!(seq("[IN:GetEvent ]").to_string(), "[IN:GetEvent ]");
    }

    #[test]
    fn unicode_copy_tokens_are_opaque() {
        let s = seq("[IN:X [SL:A कल ] ]");
        assert_eq!(s.tokens()[2], FrameToken::copy("कल"));
        // precomposed vs decomposed e-acute are different tokens
        assert!(!exact_match(&seq("[IN:X [SL:A \u{e9} ] ]"), &seq("[IN:X [SL:A e\u{301} ] ]")));
    }

    #[test]
    fn validity_examples() {
        let r = check_validity(&seq("[IN:X ]"));
        assert_eq!((r.open_count, r.close_count, r.balanced, r.schema_valid), (1, 1, true, true));
        assert_eq!(r.depth, Some(1));

        let r = check_validity(&seq("[IN:X [SL:A a ]"));
        assert_eq!((r.open_count, r.close_count, r.balanced), (2, 1, false));
        assert!(r.prefix_legal);
        assert!(!r.schema_valid);
        assert_eq!(r.depth, None);

        let r = check_validity(&seq("[IN:X [SL:A [IN:Y ] ] ]"));
        assert!(r.schema_valid);
        assert_eq!(r.depth, Some(3));

        let r = check_validity(&seq("] [IN:X"));
        assert!(!r.prefix_legal);
        assert!(!r.balanced);
    }

    #[test]
    fn balanced_but_schema_invalid() {
        for s in ["[SL:A a ]", "[IN:X a ]", "[IN:X [IN:Y ] ]", "[IN:X ] [IN:Y ]", "[IN:X [SL:A [SL:B ] ] ]"] {
            let r = check_validity(&seq(s));
            assert!(r.balanced, "{s}");
            assert!(!r.schema_valid, "{s}");
        }
    }

    #[test]
    fn parse_examples() {
        let tree = parse(&seq("[IN:GET_EVENT [SL:DATE tonight ] ]")).unwrap();
        assert_eq!(tree.root.label.as_str(), "GET_EVENT");
        assert_eq!(tree.root.slots.len(), 1);
        assert_eq!(tree.root.slots[0].label.as_str(), "DATE");
        assert_eq!(tree.root.slots[0].leaf_span(), Some(&["tonight".to_owned()][..]));

        let tree = parse(&seq("[IN:UNSUPPORTED ]")).unwrap();
        assert_eq!(tree.root.label.as_str(), "UNSUPPORTED");
        assert!(tree.root.slots.is_empty());

        assert!(matches!(
            parse(&seq("[SL:DATE ]")),
            Err(FrameError::NotSchemaValid { index: 0, .. })
        ));
    }

    #[test]
    fn parse_error_positions() {
        let at = |s: &str| match parse(&seq(s)) {
            Err(FrameError::NotSchemaValid { index, .. }) => index,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(at("[IN:X a ]"), 1);
        assert_eq!(at("[IN:X [IN:Y ] ]"), 1);
        assert_eq!(at("[IN:X [SL:A a [IN:Y ] ] ]"), 3);
        assert_eq!(at("[IN:X [SL:A [IN:Y ] a ] ]"), 4);
        assert_eq!(at("[IN:X [SL:A [SL:B ] ] ]"), 2);
        assert_eq!(at("[IN:X [SL:A a ]"), 4);
        assert_eq!(at("[IN:X ] ]"), 2);
        assert_eq!(at("[IN:X ] [IN:Y ]"), 2);
    }

    #[test]
    fn empty_leaf_is_schema_valid() {
        let tree = parse(&seq("[IN:X [SL:A ] ]")).unwrap();
        assert_eq!(tree.root.slots[0].leaf_span(), Some(&[][..]));
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn depth_examples() {
        let d = |s: &str| parse(&seq(s)).unwrap().depth();
        assert_eq!(d("[IN:X ]"), 1);
        assert_eq!(d("[IN:X [SL:A a ] ]"), 2);
        assert_eq!(d("[IN:X [SL:A [IN:Y [SL:B b ] ] ] ]"), 4);
        assert_eq!(
            d("[IN:GET_DIRECTIONS [SL:DESTINATION [IN:GET_EVENT [SL:NAME_EVENT Warriors ] [SL:CAT_EVENT game ] ] ] ]"),
            4
        );
    }

    #[test]
    fn serialize_round_trips() {
        for s in [
            "[IN:GET_EVENT [SL:DATE tonight ] ]",
            "[IN:UNSUPPORTED ]",
            "[IN:X [SL:A [IN:Y [SL:B b c ] ] [IN:Z ] ] [SL:C ] ]",
        ] {
            let tree = parse(&seq(s)).unwrap();
            assert_eq!(serialize(&tree), s);
            assert_eq!(parse(&seq(&serialize(&tree))).unwrap(), tree);
        }
    }

    #[test]
    fn exact_match_examples() {
        let g = seq("[IN:X [SL:A a ] ]");
        assert!(exact_match(&g, &g));
        assert!(!exact_match(&seq("[IN:X ]"), &seq("[IN:Y ]")));
        assert!(!exact_match(&g, &seq("[IN:X [SL:A a ]")));
        assert!(exact_match_text("[IN:X   [SL:A a ]\t]", "[IN:X [SL:A a ] ]"));
        // reordered slots are not credited
        assert!(!exact_match(
            &seq("[IN:X [SL:A a ] [SL:B b ] ]"),
            &seq("[IN:X [SL:B b ] [SL:A a ] ]")
        ));
    }
}
