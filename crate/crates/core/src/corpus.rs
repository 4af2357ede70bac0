//! Dataset and prediction file loading.
//!
//! All inputs are UTF-8. A leading byte-order mark is skipped, CRLF and LF
//! line endings are equivalent, and blank lines are ignored. Lines that fail
//! to parse are collected with their 1-based line numbers instead of being
//! dropped silently.
//!
//! Dataset layouts:
//!
//! * TSV: `utterance<TAB>frame[<TAB>language[<TAB>domain]]`
//! * JSONL: `{"utterance": ..., "frame": ..., "language"?: ..., "domain"?: ...}`
//!
//! Frames are stored in canonical form (single spaces). Releases with other
//! column layouts must be cut down to one of these shapes first, e.g.
//! `cut -f1,3` for a three-column `raw<TAB>tokenized<TAB>frame` file.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{self, TokenizeOptions};
use crate::record::{DatasetEntry, PredictionRecord};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} contains no usable records ({failures} malformed lines)")]
    EmptyDataset { path: PathBuf, failures: usize },
    #[error("cannot write {path}")]
    UnwritableFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Tsv,
    Jsonl,
}

impl DatasetFormat {
    /// `.jsonl` / `.json` files are JSONL, anything else TSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => DatasetFormat::Jsonl,
            _ => DatasetFormat::Tsv,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(DatasetFormat::Tsv),
            "jsonl" => Ok(DatasetFormat::Jsonl),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Tsv => "tsv",
            DatasetFormat::Jsonl => "jsonl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineFailure {
    pub line: usize,
    pub reason: String,
}

/// Parsed items plus the lines that were rejected or quarantined.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub items: Vec<T>,
    pub failures: Vec<LineFailure>,
}

pub fn read_text(path: &Path) -> Result<String, CorpusError> {
    let unreadable = |source| CorpusError::UnreadableFile {
        path: path.to_owned(),
        source,
    };
    let bytes = fs::read(path).map_err(unreadable)?;
    let text = String::from_utf8(bytes).map_err(|e| unreadable(io::Error::new(io::ErrorKind::InvalidData, e)))?;
    Ok(match text.strip_prefix('\u{feff}') {
        Some(rest) => rest.to_owned(),
        None => text,
    })
}

/// Non-blank lines with their 1-based numbers, line endings removed.
pub fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
        .filter(|(_, line)| !line.trim().is_empty())
}

fn canonical_frame(text: &str, opts: TokenizeOptions) -> Result<String, String> {
    let seq = frame::tokenize_with(text, opts).map_err(|e| e.to_string())?;
    frame::parse(&seq).map_err(|e| e.to_string())?;
    Ok(seq.to_string())
}

fn parse_dataset_line(line: &str, format: DatasetFormat, opts: TokenizeOptions) -> Result<DatasetEntry, String> {
    let mut entry = match format {
        DatasetFormat::Tsv => {
            let cols: Vec<&str> = line.split('\t').collect();
            if !(2..=4).contains(&cols.len()) {
                return Err(format!("expected 2 to 4 tab-separated columns, found {}", cols.len()));
            }
            let tag = |i: usize| cols.get(i).map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::to_owned);
            DatasetEntry {
                utterance: cols[0].trim().to_owned(),
                frame: cols[1].to_owned(),
                language: tag(2),
                domain: tag(3),
            }
        }
        DatasetFormat::Jsonl => serde_json::from_str::<DatasetEntry>(line).map_err(|e| e.to_string())?,
    };
    if entry.utterance.trim().is_empty() {
        return Err("empty utterance".to_owned());
    }
    entry.frame = canonical_frame(&entry.frame, opts).map_err(|e| format!("frame: {e}"))?;
    Ok(entry)
}

pub fn parse_dataset(text: &str, format: DatasetFormat, opts: TokenizeOptions) -> Loaded<DatasetEntry> {
    let mut loaded = Loaded {
        items: Vec::new(),
        failures: Vec::new(),
    };
    for (line, content) in numbered_lines(text) {
        match parse_dataset_line(content, format, opts) {
            Ok(entry) => loaded.items.push(entry),
            Err(reason) => loaded.failures.push(LineFailure { line, reason }),
        }
    }
    loaded
}

fn non_empty<T>(path: &Path, loaded: Loaded<T>) -> Result<Loaded<T>, CorpusError> {
    if loaded.items.is_empty() {
        return Err(CorpusError::EmptyDataset {
            path: path.to_owned(),
            failures: loaded.failures.len(),
        });
    }
    Ok(loaded)
}

pub fn load_dataset(path: &Path, format: DatasetFormat, opts: TokenizeOptions) -> Result<Loaded<DatasetEntry>, CorpusError> {
    let text = read_text(path)?;
    non_empty(path, parse_dataset(&text, format, opts))
}

fn parse_prediction_line(line: &str, opts: TokenizeOptions) -> Result<PredictionRecord, String> {
    let mut record: PredictionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if opts.case_insensitive {
        let canon = |s: &str| frame::tokenize_with(s, opts).map(|t| t.to_string());
        if let Ok(g) = canon(&record.gold) {
            record.gold = g;
        }
        if let Ok(p) = canon(&record.pred) {
            record.pred = p;
        }
        if let Some(Ok(f)) = record.forced_pred.as_deref().map(canon) {
            record.forced_pred = Some(f);
        }
    }
    record.validate()?;
    record.gold = frame::tokenize(&record.gold).expect("validated").to_string();
    record.pred = frame::tokenize(&record.pred).expect("validated").to_string();
    if let Some(f) = &record.forced_pred {
        record.forced_pred = Some(frame::tokenize(f).expect("validated").to_string());
    }
    Ok(record)
}

/// Parses prediction JSONL. Records that violate the record invariants are
/// quarantined in `failures` with the reason.
pub fn parse_predictions(text: &str, opts: TokenizeOptions) -> Loaded<PredictionRecord> {
    let mut loaded = Loaded {
        items: Vec::new(),
        failures: Vec::new(),
    };
    for (line, content) in numbered_lines(text) {
        match parse_prediction_line(content, opts) {
            Ok(record) => loaded.items.push(record),
            Err(reason) => loaded.failures.push(LineFailure { line, reason }),
        }
    }
    loaded
}

pub fn load_predictions(path: &Path, opts: TokenizeOptions) -> Result<Loaded<PredictionRecord>, CorpusError> {
    let text = read_text(path)?;
    non_empty(path, parse_predictions(&text, opts))
}

/// Raw frame strings for validation: every non-blank line of a plain frame
/// file, or the frame column of a dataset. Lines whose frame field cannot be
/// located are reported as failures.
pub fn load_frame_lines(path: &Path, format: Option<DatasetFormat>) -> Result<Loaded<(usize, String)>, CorpusError> {
    let text = read_text(path)?;
    let mut loaded = Loaded {
        items: Vec::new(),
        failures: Vec::new(),
    };
    for (line, content) in numbered_lines(&text) {
        let frame = match format {
            None => Ok(content.to_owned()),
            Some(DatasetFormat::Tsv) => content
                .split('\t')
                .nth(1)
                .map(str::to_owned)
                .ok_or_else(|| "missing frame column".to_owned()),
            Some(DatasetFormat::Jsonl) => serde_json::from_str::<DatasetEntry>(content)
                .map(|e| e.frame)
                .map_err(|e| e.to_string()),
        };
        match frame {
            Ok(f) => loaded.items.push((line, f)),
            Err(reason) => loaded.failures.push(LineFailure { line, reason }),
        }
    }
    Ok(loaded)
}

/// Writes `text` to `path`; a `-` path writes to stdout.
pub fn write_text(path: &Path, text: &str) -> Result<(), CorpusError> {
    let unwritable = |source| CorpusError::UnwritableFile {
        path: path.to_owned(),
        source,
    };
    if path == Path::new("-") {
        return io::stdout().write_all(text.as_bytes()).map_err(unwritable);
    }
    fs::write(path, text).map_err(unwritable)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn dataset_to_tsv(entries: &[DatasetEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.utterance);
        out.push('\t');
        out.push_str(&e.frame);
        match (&e.language, &e.domain) {
            (Some(l), Some(d)) => out.push_str(&format!("\t{l}\t{d}")),
            (Some(l), None) => out.push_str(&format!("\t{l}")),
            (None, Some(d)) => out.push_str(&format!("\t\t{d}")),
            (None, None) => {}
        }
        out.push('\n');
    }
    out
}
