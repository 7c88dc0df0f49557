//! Synthetic grammar-error items from dependency-parsed sentences.
//!
//! A rule either swaps the forms of a dependent and its head (positional
//! swap) or substitutes a form through a word map. The corrupted span is
//! parenthesised in the item context, the question asks which error the span
//! shows, and `fix` holds the original forms so the sentence can be restored.
//!
//! Input is a column format, one token per line and a blank line between
//! sentences: either `index form head relation` or 10-column CoNLL-U. Lines
//! starting with `#` are comments.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RULES: &str = include_str!("../data/tatabahasa_rules.toml");
pub const QUESTION_PREFIX: &str = "Apakah kesalahan tatabahasa untuk ";
pub const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("invalid rule table: {0}")]
    Rules(String),
    #[error("distractor pool has {have} other error names, need {need}")]
    PoolTooSmall { have: usize, need: usize },
    #[error("rule {error_id} not applicable")]
    NotApplicable { error_id: u32 },
    #[error("parse input line {line}: {reason}")]
    InvalidParse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub relation: String,
}

impl Token {
    /// Relation without a `:subtype` suffix.
    pub fn base_relation(&self) -> &str {
        self.relation.split(':').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    pub fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("empty sentence".into());
        }
        let mut roots = 0;
        for (k, t) in self.tokens.iter().enumerate() {
            if t.index != k + 1 {
                return Err(format!("token {} out of sequence (expected {})", t.index, k + 1));
            }
            if t.head > n {
                return Err(format!("token {} has head {} beyond {n}", t.index, t.head));
            }
            if t.head == t.index {
                return Err(format!("token {} is its own head", t.index));
            }
            roots += (t.head == 0) as usize;
        }
        if roots != 1 {
            return Err(format!("{roots} roots, expected exactly one"));
        }
        Ok(())
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn text(&self) -> String {
        self.forms().join(" ")
    }
}

/// Parses column-format sentences.
pub fn parse_columns(text: &str) -> Result<Vec<ParsedSentence>, GrammarError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut start_line = 1;
    let finish = |tokens: &mut Vec<Token>, out: &mut Vec<ParsedSentence>, line: usize| {
        if tokens.is_empty() {
            return Ok(());
        }
        let s = ParsedSentence {
            tokens: std::mem::take(tokens),
        };
        s.validate()
            .map_err(|reason| GrammarError::InvalidParse { line, reason })?;
        out.push(s);
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            finish(&mut current, &mut out, start_line)?;
            start_line = line_no + 1;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = if raw.contains('\t') {
            raw.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let (idx, form, head, rel) = match cols.len() {
            4 => (cols[0], cols[1], cols[2], cols[3]),
            10 => (cols[0], cols[1], cols[6], cols[7]),
            n => {
                return Err(GrammarError::InvalidParse {
                    line: line_no,
                    reason: format!("expected 4 or 10 columns, found {n}"),
                })
            }
        };
        if idx.contains('-') || idx.contains('.') {
            continue;
        }
        let num = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| GrammarError::InvalidParse {
                line: line_no,
                reason: format!("{what} {s:?} is not a number"),
            })
        };
        if current.is_empty() {
            start_line = line_no;
        }
        current.push(Token {
            index: num(idx, "index")?,
            form: form.to_string(),
            head: num(head, "head")?,
            relation: rel.to_string(),
        });
    }
    finish(&mut current, &mut out, start_line)?;
    Ok(out)
}

pub fn read_parses(path: &Path) -> Result<Vec<ParsedSentence>, GrammarError> {
    let text = std::fs::read_to_string(path).map_err(|source| GrammarError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_columns(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Swap,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSpec {
    #[serde(rename = "id")]
    pub error_id: u32,
    pub name: String,
    #[serde(default)]
    pub attested: bool,
    pub kind: RuleKind,
    /// Dependency relation to match; `*` matches any.
    pub relation: String,
    #[serde(default = "one")]
    pub max_distance: usize,
    #[serde(default)]
    pub replace: BTreeMap<String, String>,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rule: Vec<ErrorSpec>,
}

/// Parses and validates a TOML rule table.
pub fn load_rules(toml_text: &str) -> Result<Vec<ErrorSpec>, GrammarError> {
    let file: RuleFile = toml::from_str(toml_text).map_err(|e| GrammarError::Rules(e.to_string()))?;
    let mut ids = HashSet::new();
    for r in &file.rule {
        if !(1..=14).contains(&r.error_id) {
            return Err(GrammarError::Rules(format!("rule id {} outside 1-14", r.error_id)));
        }
        if !ids.insert(r.error_id) {
            return Err(GrammarError::Rules(format!("duplicate rule id {}", r.error_id)));
        }
        match r.kind {
            RuleKind::Swap if r.max_distance == 0 => {
                return Err(GrammarError::Rules(format!("rule {}: max_distance must be positive", r.error_id)))
            }
            RuleKind::Replace if r.replace.is_empty() => {
                return Err(GrammarError::Rules(format!("rule {}: empty replace map", r.error_id)))
            }
            _ => {}
        }
    }
    Ok(file.rule)
}

pub fn default_rules() -> Vec<ErrorSpec> {
    load_rules(DEFAULT_RULES).expect("bundled rule table is valid")
}

pub fn read_rules(path: &Path) -> Result<Vec<ErrorSpec>, GrammarError> {
    let text = std::fs::read_to_string(path).map_err(|source| GrammarError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_rules(&text)
}

/// What one corruption changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SwapRecord {
    Swap { positions: (usize, usize), forms: (String, String) },
    Replace { position: usize, original: String, replacement: String },
}

impl SwapRecord {
    /// Inclusive 1-based token span touched by the change.
    pub fn span(&self) -> (usize, usize) {
        match self {
            SwapRecord::Swap { positions: (a, b), .. } => (*a.min(b), *a.max(b)),
            SwapRecord::Replace { position, .. } => (*position, *position),
        }
    }
}

fn relation_matches(spec: &ErrorSpec, t: &Token) -> bool {
    spec.relation == "*" || t.relation == spec.relation || t.base_relation() == spec.relation
}

fn match_case(template: &str, word: &str) -> String {
    let upper = template.chars().next().is_some_and(char::is_uppercase);
    let mut cs = word.chars();
    match cs.next() {
        Some(c) if upper => c.to_uppercase().chain(cs).collect(),
        _ => word.to_string(),
    }
}

/// Sites where `spec` produces a visible change, in sentence order.
pub fn sites(s: &ParsedSentence, spec: &ErrorSpec) -> Vec<SwapRecord> {
    s.tokens
        .iter()
        .filter(|t| relation_matches(spec, t))
        .filter_map(|t| match spec.kind {
            RuleKind::Swap => {
                if t.head == 0 || t.index.abs_diff(t.head) > spec.max_distance {
                    return None;
                }
                let h = &s.tokens[t.head - 1];
                if h.form == t.form {
                    return None;
                }
                let (a, b) = if t.index < h.index { (t, h) } else { (h, t) };
                Some(SwapRecord::Swap {
                    positions: (a.index, b.index),
                    forms: (a.form.clone(), b.form.clone()),
                })
            }
            RuleKind::Replace => {
                let rep = spec.replace.get(&t.form.to_lowercase())?;
                let replacement = match_case(&t.form, rep);
                (replacement != t.form).then(|| SwapRecord::Replace {
                    position: t.index,
                    original: t.form.clone(),
                    replacement,
                })
            }
        })
        .collect()
}

/// Applies the `site_index`-th site of `spec`. Heads and relations are kept,
/// so applying a swap rule twice at the same site restores the sentence.
pub fn apply_swap(
    s: &ParsedSentence,
    spec: &ErrorSpec,
    site_index: usize,
) -> Result<(ParsedSentence, SwapRecord), GrammarError> {
    let record = sites(s, spec)
        .into_iter()
        .nth(site_index)
        .ok_or(GrammarError::NotApplicable { error_id: spec.error_id })?;
    let mut out = s.clone();
    match &record {
        SwapRecord::Swap { positions: (a, b), forms: (fa, fb) } => {
            out.tokens[a - 1].form = fb.clone();
            out.tokens[b - 1].form = fa.clone();
        }
        SwapRecord::Replace { position, replacement, .. } => {
            out.tokens[position - 1].form = replacement.clone();
        }
    }
    Ok((out, record))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TatabahasaItem {
    pub context: String,
    pub question: String,
    pub choices: BTreeMap<char, String>,
    pub answer: char,
    pub fix: String,
}

impl TatabahasaItem {
    /// The parenthesised text the question points at.
    pub fn marked(&self) -> Option<&str> {
        self.question.strip_prefix(QUESTION_PREFIX)?.strip_prefix('(')?.strip_suffix(')')
    }

    /// Restores the original sentence by substituting `fix` for the marked
    /// span in the context.
    pub fn reconstruct(&self) -> Option<String> {
        let marker = format!("({})", self.marked()?);
        (self.context.matches(&marker).count() == 1).then(|| self.context.replacen(&marker, &self.fix, 1))
    }
}

impl fmt::Display for TatabahasaItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Context: {}", self.context)?;
        writeln!(f, "Question: {}", self.question)?;
        let choices: Vec<String> = self
            .choices
            .iter()
            .map(|(k, v)| format!("\"{k}\": \"{v}\""))
            .collect();
        writeln!(f, "Choice: {{ {} }}", choices.join(", "))?;
        writeln!(f, "Answer: {}", self.answer)?;
        write!(f, "Fix: {}", self.fix)
    }
}

/// The item a site would produce, or `None` when its marker would be
/// ambiguous in the context.
fn render_site(s: &ParsedSentence, spec: &ErrorSpec, site_index: usize) -> Option<(String, String, String)> {
    let (corrupted, record) = apply_swap(s, spec, site_index).ok()?;
    let (lo, hi) = record.span();
    let forms = corrupted.forms();
    let marked = forms[lo - 1..hi].join(" ");
    let fix = s.forms()[lo - 1..hi].join(" ");
    let mut parts: Vec<String> = forms[..lo - 1].iter().map(|f| f.to_string()).collect();
    parts.push(format!("({marked})"));
    parts.extend(forms[hi..].iter().map(|f| f.to_string()));
    let context = parts.join(" ");
    let marker = format!("({marked})");
    (context.matches(&marker).count() == 1).then_some((context, marked, fix))
}

fn usable_sites(s: &ParsedSentence, spec: &ErrorSpec) -> Vec<usize> {
    (0..sites(s, spec).len())
        .filter(|&i| render_site(s, spec, i).is_some())
        .collect()
}

pub fn is_applicable(s: &ParsedSentence, spec: &ErrorSpec) -> bool {
    !usable_sites(s, spec).is_empty()
}

/// Builds one item. The site, the three distractors and the answer letter
/// are drawn from `rng_seed`.
pub fn make_item(
    s: &ParsedSentence,
    spec: &ErrorSpec,
    distractor_pool: &[ErrorSpec],
    rng_seed: u64,
) -> Result<TatabahasaItem, GrammarError> {
    let mut names: Vec<&str> = Vec::new();
    for d in distractor_pool {
        if d.name != spec.name && !names.contains(&d.name.as_str()) {
            names.push(&d.name);
        }
    }
    if names.len() < 3 {
        return Err(GrammarError::PoolTooSmall { have: names.len(), need: 3 });
    }
    let usable = usable_sites(s, spec);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let &site = usable
        .choose(&mut rng)
        .ok_or(GrammarError::NotApplicable { error_id: spec.error_id })?;
    let (context, marked, fix) = render_site(s, spec, site).expect("usable site renders");

    let distractors: Vec<&str> = names.choose_multiple(&mut rng, 3).copied().collect();
    let slot = rng.gen_range(0..4);
    let mut choices = BTreeMap::new();
    let mut rest = distractors.into_iter();
    for (k, letter) in LETTERS.into_iter().enumerate() {
        let name = if k == slot { spec.name.as_str() } else { rest.next().unwrap() };
        choices.insert(letter, name.to_string());
    }
    Ok(TatabahasaItem {
        context,
        question: format!("{QUESTION_PREFIX}({marked})"),
        choices,
        answer: LETTERS[slot],
        fix,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarReport {
    pub sentences: usize,
    pub items: usize,
    /// Items emitted per error id.
    pub per_error: BTreeMap<u32, usize>,
    /// Times a rule was tried on a sentence and did not apply, per error id.
    pub skipped_inapplicable: BTreeMap<u32, usize>,
}

/// SplitMix64 finaliser, used to derive per-sentence seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Up to `per_sentence` items per sentence, cycling through the rules so
/// every rule gets its turn before any repeats.
pub fn generate_corpus(
    parsed: &[ParsedSentence],
    specs: &[ErrorSpec],
    per_sentence: usize,
    seed: u64,
) -> Result<(Vec<TatabahasaItem>, GrammarReport), GrammarError> {
    if specs.len() < 4 {
        return Err(GrammarError::PoolTooSmall {
            have: specs.len().saturating_sub(1),
            need: 3,
        });
    }
    let mut report = GrammarReport {
        sentences: parsed.len(),
        ..Default::default()
    };
    let mut plan: Vec<(usize, usize)> = Vec::new();
    let mut cursor = 0;
    for (si, s) in parsed.iter().enumerate() {
        let applicable: Vec<bool> = specs.par_iter().map(|spec| is_applicable(s, spec)).collect();
        let n = specs.len();
        let mut used = vec![false; n];
        let mut counted = vec![false; n];
        let mut taken = 0;
        let mut scanned = 0;
        let mut pos = cursor;
        while taken < per_sentence && scanned < n {
            let k = pos % n;
            pos += 1;
            scanned += 1;
            if used[k] {
                continue;
            }
            if applicable[k] {
                plan.push((si, k));
                used[k] = true;
                taken += 1;
                scanned = 0;
                cursor = (k + 1) % n;
            } else if !counted[k] {
                counted[k] = true;
                *report.skipped_inapplicable.entry(specs[k].error_id).or_default() += 1;
            }
        }
    }
    let items: Vec<TatabahasaItem> = plan
        .par_iter()
        .map(|&(si, k)| make_item(&parsed[si], &specs[k], specs, mix_seed(mix_seed(seed, si as u64), k as u64)))
        .collect::<Result<_, _>>()?;
    for &(_, k) in &plan {
        *report.per_error.entry(specs[k].error_id).or_default() += 1;
    }
    report.items = items.len();
    Ok((items, report))
}
