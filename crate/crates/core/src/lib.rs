//! Tools for linearized decoupled semantic frames produced by task-oriented
//! semantic parsers: parsing and validity checks, first-error taxonomy,
//! oracle training pairs, synthetic error injection, and confidence
//! estimation over model predictions.
//!
//! ```
//! use frameprobe::{check_validity, classify_error, first_divergence, tokenize};
//! use frameprobe::taxonomy::OodRule;
//!
//! let gold = tokenize("[IN:X [SL:DATE on Monday ] ]")?;
//! let pred = tokenize("[IN:X [SL:DATE Monday ] ]")?;
//! assert!(check_validity(&pred).balanced);
//! let div = first_divergence(&pred, &gold, None).unwrap();
//! let kind = classify_error(&div, "X", Some("X"), &OodRule::default());
//! assert_eq!(kind.code(), "lf");
//! # Ok::<(), frameprobe::FrameError>(())
//! ```

pub mod confidence;
pub mod corpus;
pub mod frame;
pub mod oracle;
pub mod perturb;
pub mod record;
pub mod report;
pub mod synth;
pub mod taxonomy;

pub use frame::{check_validity, exact_match, parse, serialize, tokenize, FrameError, FrameToken, FrameTree, TokenSeq, ValidityReport};
pub use record::{DatasetEntry, PredictionRecord};
pub use taxonomy::{classify_error, first_divergence, ErrorType};
