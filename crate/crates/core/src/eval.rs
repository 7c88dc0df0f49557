//! Multiple-choice benchmark harness with n-shot prompts and majority vote.
//!
//! Prompt layout (one blank line between blocks):
//!
//! ```text
//! Jawab soalan berikut.
//!
//! Soalan: <exemplar question>
//! A. <text>
//! B. <text>
//! Jawapan: B
//!
//! Soalan: <target question>
//! A. <text>
//! B. <text>
//! Jawapan:
//! ```
//!
//! A question's `instruction`, when present, is printed on its own line
//! before `Soalan:`. Exemplars are the first `shots` questions of the file,
//! skipping the target.
//!
//! Answers are extracted by the first matching rule: `Jawapan: X`, then a
//! bare letter as the first token, then a line starting with `X.` or `X)`.
//! Votes are decided by the most frequent letter, ties going to the letter
//! seen first.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat_template::Turn;
use crate::grammar_synth::mix_seed;
use crate::pylit;
use crate::synthgen::client::{complete_with_retry, ChatClient, RetryPolicy};
use crate::synthgen::GenerationParams;

pub const PROMPT_HEADER: &str = "Jawab soalan berikut.";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{source_name}:{line}: {reason}")]
    InvalidRecord {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("exemplar {0:?} is the target question")]
    ExemplarOverlap(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub text: String,
    pub answer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkQuestion {
    #[serde(default)]
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub instruction: Option<String>,
    pub choices: BTreeMap<char, Choice>,
    #[serde(default, alias = "website")]
    pub source: String,
}

impl BenchmarkQuestion {
    pub fn validate(&self) -> Result<(), String> {
        if self.choices.len() < 2 {
            return Err(format!("{} choices, need at least 2", self.choices.len()));
        }
        if let Some(bad) = self.choices.keys().find(|c| !c.is_ascii_uppercase()) {
            return Err(format!("choice key {bad:?} is not an uppercase letter"));
        }
        match self.choices.values().filter(|c| c.answer).count() {
            1 => Ok(()),
            n => Err(format!("{n} true answers, expected exactly one")),
        }
    }

    pub fn key(&self) -> char {
        *self
            .choices
            .iter()
            .find(|(_, c)| c.answer)
            .expect("validated question has a key")
            .0
    }

    pub fn letters(&self) -> Vec<char> {
        self.choices.keys().copied().collect()
    }

    fn block(&self, out: &mut String) {
        if let Some(ins) = self.instruction.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push_str(ins);
            out.push('\n');
        }
        out.push_str("Soalan: ");
        out.push_str(&self.question);
        out.push('\n');
        for (letter, c) in &self.choices {
            out.push_str(&format!("{letter}. {}\n", c.text));
        }
        out.push_str("Jawapan:");
    }
}

/// Parses JSONL (or Python-literal lines) of benchmark records. Records
/// without an id get `q<line>`.
pub fn parse_questions(text: &str, source_name: &str) -> Result<Vec<BenchmarkQuestion>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| EvalError::InvalidRecord {
            source_name: source_name.to_string(),
            line: i + 1,
            reason,
        };
        let value = pylit::parse(line.trim()).map_err(|e| err(e.to_string()))?;
        let mut q: BenchmarkQuestion = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
        q.validate().map_err(err)?;
        if q.id.is_empty() {
            q.id = format!("q{}", i + 1);
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions(path: &Path) -> Result<Vec<BenchmarkQuestion>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    parse_questions(&text, &name)
}

/// The first `shots` questions, skipping `target`.
pub fn select_exemplars(questions: &[BenchmarkQuestion], target: usize, shots: usize) -> Vec<&BenchmarkQuestion> {
    questions
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .take(shots)
        .map(|(_, q)| q)
        .collect()
}

pub fn build_prompt(q: &BenchmarkQuestion, exemplars: &[&BenchmarkQuestion]) -> Result<String, EvalError> {
    let mut out = String::from(PROMPT_HEADER);
    for ex in exemplars {
        if ex.id == q.id || **ex == *q {
            return Err(EvalError::ExemplarOverlap(ex.id.clone()));
        }
        out.push_str("\n\n");
        ex.block(&mut out);
        out.push(' ');
        out.push(ex.key());
    }
    out.push_str("\n\n");
    q.block(&mut out);
    Ok(out)
}

fn rule_answer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i:jawapan)\s*:\s*\(?([A-Z])\b").unwrap())
}

fn rule_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*\(?([A-Z])[.)]").unwrap())
}

/// Extracts a letter from a generation; `None` means abstain.
pub fn extract_answer(generation: &str, valid: &[char]) -> Option<char> {
    let ok = |c: char| valid.contains(&c).then_some(c);
    let letter = |m: regex::Captures| m[1].chars().next();
    if let Some(c) = rule_answer().captures_iter(generation).filter_map(letter).find_map(ok) {
        return Some(c);
    }
    if let Some(tok) = generation.split_whitespace().next() {
        let tok = tok.trim_start_matches('(').trim_end_matches(['.', ')', ':', ',']);
        let mut cs = tok.chars();
        if let (Some(c), None) = (cs.next(), cs.next()) {
            if let Some(c) = ok(c) {
                return Some(c);
            }
        }
    }
    rule_line().captures_iter(generation).filter_map(letter).find_map(ok)
}

/// Most frequent letter; ties go to the letter that appeared first.
pub fn majority_vote(votes: &[Option<char>]) -> Option<char> {
    let mut counts: HashMap<char, (usize, usize)> = HashMap::new();
    for (pos, v) in votes.iter().enumerate() {
        if let Some(c) = v {
            counts.entry(*c).or_insert((0, pos)).0 += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(c, _)| c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub shots: usize,
    pub samples_per_question: usize,
    pub gen: GenerationParams,
    pub seed: u64,
    /// Questions evaluated at once.
    pub concurrency: usize,
    pub retries: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            shots: 0,
            samples_per_question: 5,
            gen: GenerationParams::default(),
            seed: 0,
            concurrency: 4,
            retries: 2,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self, n_questions: usize) -> Result<(), EvalError> {
        if self.samples_per_question == 0 {
            return Err(EvalError::InvalidConfig("samples_per_question must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(EvalError::InvalidConfig("concurrency must be at least 1".into()));
        }
        if n_questions > 0 && self.shots >= n_questions {
            return Err(EvalError::InvalidConfig(format!(
                "{} shots need more than {n_questions} questions",
                self.shots
            )));
        }
        self.gen.validate().map_err(|e| EvalError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub votes: Vec<Option<char>>,
    #[serde(rename = "final")]
    pub final_answer: Option<char>,
    pub key: char,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub shots: usize,
    /// In question-file order.
    pub per_question: Vec<QuestionResult>,
    pub correct: usize,
    pub total: usize,
    pub abstentions: usize,
    /// `100 * correct / total`.
    pub accuracy: f64,
}

pub fn accuracy(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

fn eval_question(
    questions: &[BenchmarkQuestion],
    i: usize,
    cfg: &EvalConfig,
    client: &dyn ChatClient,
) -> Result<QuestionResult, EvalError> {
    let q = &questions[i];
    let prompt = build_prompt(q, &select_exemplars(questions, i, cfg.shots))?;
    let messages = [Turn::user(prompt)];
    let letters = q.letters();
    let policy = RetryPolicy {
        retries: cfg.retries,
        backoff_base: std::time::Duration::from_millis(50),
    };
    let mut votes = Vec::with_capacity(cfg.samples_per_question);
    let mut error = None;
    for s in 0..cfg.samples_per_question {
        let params = cfg.gen.clone().with_seed(mix_seed(mix_seed(cfg.seed, i as u64), s as u64));
        match complete_with_retry(client, &messages, &params, policy).0 {
            Ok(text) => votes.push(extract_answer(&text, &letters)),
            Err(e) => {
                error = Some(e.to_string());
                votes.push(None);
            }
        }
    }
    let final_answer = majority_vote(&votes);
    let key = q.key();
    Ok(QuestionResult {
        id: q.id.clone(),
        votes,
        final_answer,
        key,
        correct: final_answer == Some(key),
        error,
    })
}

pub fn run_eval(
    questions: &[BenchmarkQuestion],
    cfg: &EvalConfig,
    client: &dyn ChatClient,
) -> Result<EvalResult, EvalError> {
    cfg.validate(questions.len())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let per_question: Vec<QuestionResult> = pool.install(|| {
        (0..questions.len())
            .into_par_iter()
            .map(|i| eval_question(questions, i, cfg, client))
            .collect::<Result<_, _>>()
    })?;
    let correct = per_question.iter().filter(|r| r.correct).count();
    let abstentions = per_question.iter().filter(|r| r.final_answer.is_none()).count();
    let total = per_question.len();
    Ok(EvalResult {
        shots: cfg.shots,
        per_question,
        correct,
        total,
        abstentions,
        accuracy: accuracy(correct, total),
    })
}

/// One row of the accuracy table, e.g. `my-model & 65.90 & 57.31 \\`.
pub fn accuracy_row(model: &str, results: &[EvalResult]) -> String {
    let cells: Vec<String> = results.iter().map(|r| format!("{:.2}", r.accuracy)).collect();
    format!("{model} & {} \\\\", cells.join(" & "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub config: EvalConfig,
    pub results: Vec<EvalResult>,
    pub table_header: String,
    pub table_row: String,
}

/// Runs every shot setting in `shots` and assembles the report.
pub fn run_report(
    model: &str,
    questions: &[BenchmarkQuestion],
    cfg: &EvalConfig,
    shots: &[usize],
    client: &dyn ChatClient,
) -> Result<EvalReport, EvalError> {
    let mut results = Vec::new();
    for &s in shots {
        let c = EvalConfig { shots: s, ..cfg.clone() };
        results.push(run_eval(questions, &c, client)?);
    }
    let header: Vec<String> = shots
        .iter()
        .map(|s| format!("Tatabahasa {s} shot{}", if *s == 1 || *s == 0 { "" } else { "s" }))
        .collect();
    Ok(EvalReport {
        model: model.to_string(),
        config: cfg.clone(),
        table_header: format!("Model & {} \\\\", header.join(" & ")),
        table_row: accuracy_row(model, &results),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "{'question': '........, sudah dapat memandu kereta rupa-rupanya kamu !', 'instruction': None, 'choices': {'A': {'text': 'Oh', 'answer': False}, 'B': {'text': 'Eh', 'answer': True}, 'C': {'text': 'Hai', 'answer': False}, 'D': {'text': 'Ah', 'answer': False}}, 'website': 'https://tatabahasabm.tripod.com/latih/kseruc.htm'}";

    #[test]
    fn example_record_loads() {
        let qs = parse_questions(EXAMPLE, "t").unwrap();
        assert_eq!(qs[0].key(), 'B');
        assert_eq!(qs[0].id, "q1");
        assert!(qs[0].source.ends_with("kseruc.htm"));
    }

    #[test]
    fn two_true_answers_name_the_line() {
        let bad = EXAMPLE.replace("'text': 'Oh', 'answer': False", "'text': 'Oh', 'answer': True");
        let text = format!("{EXAMPLE}\n{bad}\n");
        match parse_questions(&text, "t") {
            Err(EvalError::InvalidRecord { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("2 true answers"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extraction_rules() {
        let v = ['A', 'B', 'C', 'D'];
        assert_eq!(extract_answer("Jawapan: C kerana ia betul", &v), Some('C'));
        assert_eq!(extract_answer("B", &v), Some('B'));
        assert_eq!(extract_answer("B. Eh", &v), Some('B'));
        assert_eq!(extract_answer("Pilihan saya:\nD) Ah", &v), Some('D'));
        assert_eq!(extract_answer("saya tidak pasti", &v), None);
        assert_eq!(extract_answer("Jawapan: E", &v), None);
        assert_eq!(extract_answer("jawapan : (a)", &v), None);
        assert_eq!(extract_answer("A adalah salah. Jawapan: D", &v), Some('D'));
        assert_eq!(extract_answer("Cara terbaik", &v), None);
    }

    #[test]
    fn vote_ties_go_to_first_seen() {
        let v = |s: &str| s.chars().map(|c| (c != '-').then_some(c)).collect::<Vec<_>>();
        assert_eq!(majority_vote(&v("AABCA")), Some('A'));
        assert_eq!(majority_vote(&v("AABBC")), Some('A'));
        assert_eq!(majority_vote(&v("BBAAC")), Some('B'));
        assert_eq!(majority_vote(&v("-C-BB")), Some('B'));
        assert_eq!(majority_vote(&v("-----")), None);
    }

    #[test]
    fn zero_shot_prompt() {
        let qs = parse_questions(EXAMPLE, "t").unwrap();
        let p = build_prompt(&qs[0], &[]).unwrap();
        assert_eq!(
            p,
            "Jawab soalan berikut.\n\nSoalan: ........, sudah dapat memandu kereta rupa-rupanya kamu !\nA. Oh\nB. Eh\nC. Hai\nD. Ah\nJawapan:"
        );
        assert!(matches!(build_prompt(&qs[0], &[&qs[0]]), Err(EvalError::ExemplarOverlap(_))));
    }

    #[test]
    fn accuracy_arithmetic() {
        assert!((accuracy(230, 349) - 65.902_578_796).abs() < 1e-6);
        assert_eq!(accuracy(0, 0), 0.0);
    }
}
