//! Report assembly and rendering.
//!
//! Every report renders to JSON and to a markdown table. Percentages are
//! rounded to two decimals before either rendering, so both carry the same
//! numbers; raw counts are always included alongside.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::confidence::AblationRow;
use crate::frame;
use crate::record::PredictionRecord;
use crate::taxonomy::{ErrorDistribution, ErrorType};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DEPTH_RULE: &str =
    "depth counts intent and slot nesting levels; a bare intent has depth 1";
pub const EM_RULE: &str = "exact match compares whitespace-normalized tokens; no credit for reordering";
pub const TV_RULE: &str = "tree validity requires equal open/close counts and no prefix with more closes than opens";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReportKind {
    EmTvByDepth,
    ErrorDistribution,
    CeResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub depth_rule: String,
    pub em_rule: String,
    pub tv_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_source: Option<String>,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            depth_rule: DEPTH_RULE.to_owned(),
            em_rule: EM_RULE.to_owned(),
            tv_rule: TV_RULE.to_owned(),
            divergence_source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub conventions: Conventions,
    /// Records that contributed to the tables.
    pub records: usize,
    /// Records rejected at load time; none of them contribute.
    pub quarantined: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl ReportMetadata {
    pub fn new(records: usize, quarantined: usize) -> Self {
        ReportMetadata {
            tool_version: TOOL_VERSION.to_owned(),
            conventions: Conventions::default(),
            records,
            quarantined,
            extra: BTreeMap::new(),
        }
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| round2(100.0 * num as f64 / den as f64))
}

fn fmt_pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub count: usize,
    pub em_count: usize,
    pub tv_count: usize,
    pub em_pct: Option<f64>,
    pub tv_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub bucket: String,
    pub records: usize,
    pub errors: usize,
    pub counts: BTreeMap<String, usize>,
    pub percentages: BTreeMap<String, Option<f64>>,
    pub valid_trees: usize,
    pub tree_validity_pct: Option<f64>,
    pub forced_divergences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeRow {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Depth(Vec<DepthRow>),
    Errors(Vec<ErrorRow>),
    Ce(Vec<CeRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ReportKind,
    pub metadata: ReportMetadata,
    pub rows: Payload,
}

/// Exact match and tree validity per gold depth, with a row for every depth
/// from 1 to the deepest gold frame. Tree validity is judged on the
/// prediction's bracket balance.
pub fn report_em_tv_by_depth(records: &[PredictionRecord], quarantined: usize) -> Report {
    let mut by_depth: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for record in records {
        let Ok(gold) = record.gold_seq() else { continue };
        let Ok(tree) = frame::parse(&gold) else { continue };
        let entry = by_depth.entry(tree.depth()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(record.is_exact_match());
        entry.2 += usize::from(record.pred_seq().is_ok_and(|p| frame::check_validity(&p).balanced));
    }
    let max_depth = by_depth.keys().next_back().copied().unwrap_or(0);
    let rows = (1..=max_depth)
        .map(|depth| {
            let (count, em_count, tv_count) = by_depth.get(&depth).copied().unwrap_or_default();
            DepthRow {
                depth,
                count,
                em_count,
                tv_count,
                em_pct: pct(em_count, count),
                tv_pct: pct(tv_count, count),
            }
        })
        .collect();
    let counted = by_depth.values().map(|v| v.0).sum();
    Report {
        kind: ReportKind::EmTvByDepth,
        metadata: ReportMetadata::new(counted, quarantined),
        rows: Payload::Depth(rows),
    }
}

pub fn report_error_distribution(dists: &[ErrorDistribution], quarantined: usize) -> Report {
    let rows: Vec<ErrorRow> = dists
        .iter()
        .map(|d| ErrorRow {
            bucket: d.bucket.to_string(),
            records: d.records,
            errors: d.total,
            counts: ErrorType::ALL
                .iter()
                .map(|t| (t.code().to_owned(), d.counts.get(*t)))
                .collect(),
            percentages: ErrorType::ALL
                .iter()
                .map(|t| (t.code().to_owned(), pct(d.counts.get(*t), d.total)))
                .collect(),
            valid_trees: d.valid_trees,
            tree_validity_pct: pct(d.valid_trees, d.total),
            forced_divergences: d.forced_divergences,
        })
        .collect();
    let records = rows.iter().map(|r| r.records).sum();
    let forced: usize = rows.iter().map(|r| r.forced_divergences).sum();
    let errors: usize = rows.iter().map(|r| r.errors).sum();
    let mut metadata = ReportMetadata::new(records, quarantined);
    metadata.conventions.divergence_source = Some(format!(
        "{forced} of {errors} first errors located with forced decoding; the rest by free-running prefix"
    ));
    Report {
        kind: ReportKind::ErrorDistribution,
        metadata,
        rows: Payload::Errors(rows),
    }
}

pub fn report_ce(rows: &[AblationRow], records: usize, quarantined: usize) -> Report {
    let rows = rows
        .iter()
        .map(|r| CeRow {
            name: r.name(),
            precision: round2(100.0 * r.prf.precision),
            recall: round2(100.0 * r.prf.recall),
            f1: round2(100.0 * r.prf.f1),
            true_positives: r.prf.true_positives,
            false_positives: r.prf.false_positives,
            false_negatives: r.prf.false_negatives,
            true_negatives: r.prf.true_negatives,
            precision_defined: r.prf.precision_defined,
        })
        .collect();
    Report {
        kind: ReportKind::CeResults,
        metadata: ReportMetadata::new(records, quarantined),
        rows: Payload::Ce(rows),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let table = |header: &[&str], rows: Vec<Vec<String>>| {
            let mut t = format!("| {} |\n", header.join(" | "));
            t.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in rows {
                t.push_str(&format!("| {} |\n", row.join(" | ")));
            }
            t
        };
        match &self.rows {
            Payload::Depth(rows) => {
                out.push_str("## Exact match and tree validity by depth\n\n");
                out.push_str(&table(
                    &["d", "n", "EM", "TV", "EM count", "TV count"],
                    rows.iter()
                        .map(|r| {
                            vec![
                                r.depth.to_string(),
                                r.count.to_string(),
                                fmt_pct(r.em_pct),
                                fmt_pct(r.tv_pct),
                                r.em_count.to_string(),
                                r.tv_count.to_string(),
                            ]
                        })
                        .collect(),
                ));
            }
            Payload::Errors(rows) => {
                out.push_str("## Error distribution\n\n");
                let mut header = vec!["bucket", "records", "errors"];
                header.extend(ErrorType::ALL.iter().map(|t| t.code()));
                header.push("valid");
                out.push_str(&table(
                    &header,
                    rows.iter()
                        .map(|r| {
                            let mut cells = vec![r.bucket.clone(), r.records.to_string(), r.errors.to_string()];
                            for t in ErrorType::ALL {
                                let code = t.code();
                                cells.push(format!("{} ({})", fmt_pct(r.percentages[code]), r.counts[code]));
                            }
                            cells.push(format!("{} ({})", fmt_pct(r.tree_validity_pct), r.valid_trees));
                            cells
                        })
                        .collect(),
                ));
            }
            Payload::Ce(rows) => {
                out.push_str("## Confidence estimation\n\n");
                out.push_str(&table(
                    &["", "P", "R", "F1", "TP", "FP", "FN", "TN"],
                    rows.iter()
                        .map(|r| {
                            let name = if r.name.starts_with("--") {
                                format!("&nbsp;&nbsp;{}", r.name)
                            } else {
                                r.name.clone()
                            };
                            let p = if r.precision_defined {
                                format!("{:.2}", r.precision)
                            } else {
                                format!("{:.2}*", r.precision)
                            };
                            vec![
                                name,
                                p,
                                format!("{:.2}", r.recall),
                                format!("{:.2}", r.f1),
                                r.true_positives.to_string(),
                                r.false_positives.to_string(),
                                r.false_negatives.to_string(),
                                r.true_negatives.to_string(),
                            ]
                        })
                        .collect(),
                ));
                if rows.iter().any(|r| !r.precision_defined) {
                    out.push_str("\n\\* nothing predicted positive; precision reported as 0\n");
                }
            }
        }
        let m = &self.metadata;
        out.push_str(&format!(
            "\n- tool version: {}\n- records: {}\n- quarantined: {}\n- {}\n- {}\n- {}\n",
            m.tool_version, m.records, m.quarantined, m.conventions.depth_rule, m.conventions.em_rule, m.conventions.tv_rule
        ));
        if let Some(src) = &m.conventions.divergence_source {
            out.push_str(&format!("- {src}\n"));
        }
        for (k, v) in &m.extra {
            out.push_str(&format!("- {k}: {v}\n"));
        }
        out
    }
}
