//! Text cleaning rules applied after deduplication.
//!
//! Order is fixed: HTTP-error filter, length filter, space-run
//! normalisation, dot-run normalisation. Filters drop whole documents and
//! never touch text; normalisers rewrite text and never drop documents.
//!
//! "HTTP error" has no precise definition upstream. Here it means a
//! case-insensitive substring match against a configurable pattern list,
//! [`DEFAULT_HTTP_ERROR_PATTERNS`] unless overridden.

use std::borrow::Cow;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Document;

pub const DEFAULT_HTTP_ERROR_PATTERNS: &[&str] = &[
    "404 not found",
    "403 forbidden",
    "500 internal server error",
    "access denied",
    "request timed out",
    "page not found",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    pub min_chars: usize,
    pub max_space_run: usize,
    pub max_dot_run: usize,
    pub http_error_patterns: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            min_chars: 3,
            max_space_run: 6,
            max_dot_run: 6,
            http_error_patterns: DEFAULT_HTTP_ERROR_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_space_run == 0 || self.max_dot_run == 0 {
            return Err("run caps must be at least 1".into());
        }
        Ok(())
    }
}

/// Reads a pattern file: one pattern per line, blank lines and `#` comments
/// ignored.
pub fn load_patterns(path: impl AsRef<Path>) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop,
}

/// Drops a document whose text contains any pattern, ignoring case.
pub fn filter_http_error<S: AsRef<str>>(doc: &Document, patterns: &[S]) -> Decision {
    if patterns.is_empty() {
        return Decision::Keep;
    }
    let lower = doc.text.to_lowercase();
    let hit = patterns
        .iter()
        .map(|p| p.as_ref().to_lowercase())
        .any(|p| !p.is_empty() && lower.contains(&p));
    if hit {
        Decision::Drop
    } else {
        Decision::Keep
    }
}

/// Drops a document with fewer than `min_chars` Unicode scalar values.
pub fn filter_length(doc: &Document, min_chars: usize) -> Decision {
    if doc.text.chars().take(min_chars).count() < min_chars {
        Decision::Drop
    } else {
        Decision::Keep
    }
}

/// Caps every run of `ch` at `cap` repetitions.
fn cap_runs(text: &str, ch: char, cap: usize) -> Cow<'_, str> {
    assert!(cap >= 1, "run cap must be at least 1");
    let mut run = 0usize;
    let needs_work = text.chars().any(|c| {
        run = if c == ch { run + 1 } else { 0 };
        run > cap
    });
    if !needs_work {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len());
    run = 0;
    for c in text.chars() {
        if c == ch {
            run += 1;
            if run > cap {
                continue;
            }
        } else {
            run = 0;
        }
        out.push(c);
    }
    Cow::Owned(out)
}

/// Replaces every run of `cap` or more U+0020 spaces with exactly `cap`.
/// Tabs, newlines and other whitespace are left alone.
pub fn normalize_whitespace(text: &str, cap: usize) -> Cow<'_, str> {
    cap_runs(text, ' ', cap)
}

/// Replaces every run of `cap` or more `.` with exactly `cap`. The ellipsis
/// character U+2026 is not a dot.
pub fn normalize_dots(text: &str, cap: usize) -> Cow<'_, str> {
    cap_runs(text, '.', cap)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_short: usize,
    pub dropped_http_error: usize,
    /// Documents whose text changed under space normalisation.
    pub normalized_space: usize,
    /// Documents whose text changed under dot normalisation.
    pub normalized_dots: usize,
}

impl CleanReport {
    pub fn input_count(&self) -> usize {
        self.kept + self.dropped_short + self.dropped_http_error
    }

    pub fn merge(mut self, other: CleanReport) -> CleanReport {
        self.kept += other.kept;
        self.dropped_short += other.dropped_short;
        self.dropped_http_error += other.dropped_http_error;
        self.normalized_space += other.normalized_space;
        self.normalized_dots += other.normalized_dots;
        self
    }
}

/// Applies all four rules to one document.
pub fn clean_document(doc: Document, cfg: &CleanConfig) -> (Option<Document>, CleanReport) {
    let mut report = CleanReport::default();
    if filter_http_error(&doc, &cfg.http_error_patterns) == Decision::Drop {
        report.dropped_http_error = 1;
        return (None, report);
    }
    if filter_length(&doc, cfg.min_chars) == Decision::Drop {
        report.dropped_short = 1;
        return (None, report);
    }
    let mut doc = doc;
    if let Cow::Owned(t) = normalize_whitespace(&doc.text, cfg.max_space_run) {
        doc.text = t;
        report.normalized_space = 1;
    }
    if let Cow::Owned(t) = normalize_dots(&doc.text, cfg.max_dot_run) {
        doc.text = t;
        report.normalized_dots = 1;
    }
    report.kept = 1;
    (Some(doc), report)
}

/// Cleans a corpus in parallel, preserving input order.
///
/// The pipeline is idempotent when `min_chars` does not exceed either run cap
/// and no pattern contains a run longer than the caps (true for defaults).
pub fn clean_corpus(docs: Vec<Document>, cfg: &CleanConfig) -> (Vec<Document>, CleanReport) {
    let results: Vec<(Option<Document>, CleanReport)> =
        docs.into_par_iter().map(|d| clean_document(d, cfg)).collect();
    let mut report = CleanReport::default();
    let mut out = Vec::with_capacity(results.len());
    for (doc, r) in results {
        report = report.merge(r);
        out.extend(doc);
    }
    (out, report)
}
