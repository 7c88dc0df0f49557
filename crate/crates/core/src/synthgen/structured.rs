//! Recovery of QA items from a model's structured reply.
//!
//! The outermost balanced `{...}` literal is located (quotes are respected,
//! so braces inside strings do not count), parsed as JSON or a Python dict,
//! and its `qa` list validated item by item. A `{"qa": {"qa": [...]}}`
//! nesting is unwrapped.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SynthError;
use crate::pylit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaSchema {
    QaChoice,
    OpenQa,
}

pub const CHOICE_LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAChoiceItem {
    pub question: String,
    pub options: BTreeMap<char, String>,
    pub answer: char,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QaRecord {
    Choice(QAChoiceItem),
    Open(QAItem),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredQa {
    pub items: Vec<QaRecord>,
    pub rejected: Vec<Rejection>,
}

/// Byte range of the first balanced top-level object literal.
pub fn find_object(raw: &str) -> Result<(usize, usize), SynthError> {
    let start = raw.find('{').ok_or(SynthError::Parse {
        offset: 0,
        message: "no object literal".into(),
    })?;
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in raw[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok((start, start + i + 1));
                }
            }
            _ => {}
        }
    }
    Err(SynthError::Parse {
        offset: raw.len(),
        message: format!("object opened at byte {start} is never closed"),
    })
}

fn non_empty_str<'a>(item: &'a Value, key: &str, label: &str) -> Result<&'a str, String> {
    match item.get(key) {
        None | Some(Value::Null) => Err(format!("missing {label}")),
        Some(Value::String(s)) if s.trim().is_empty() => Err(format!("empty {label}")),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("{label} is not a string")),
    }
}

fn validate_choice(item: &Value) -> Result<QAChoiceItem, String> {
    let question = non_empty_str(item, "question", "question")?.to_string();
    let mut options = BTreeMap::new();
    for letter in CHOICE_LETTERS {
        let key = letter.to_string();
        let text = non_empty_str(item, &key, &format!("option {key}"))?;
        options.insert(letter, text.to_string());
    }
    let answer = non_empty_str(item, "answer", "answer")?;
    let answer = match answer.trim() {
        a if a.len() == 1 && CHOICE_LETTERS.contains(&a.chars().next().unwrap()) => a.chars().next().unwrap(),
        _ => return Err("answer not in A-D".into()),
    };
    Ok(QAChoiceItem {
        question,
        options,
        answer,
    })
}

fn validate_open(item: &Value) -> Result<QAItem, String> {
    Ok(QAItem {
        question: non_empty_str(item, "question", "question")?.to_string(),
        answer: non_empty_str(item, "answer", "answer")?.to_string(),
    })
}

pub fn parse_structured_qa(raw: &str, schema: QaSchema) -> Result<StructuredQa, SynthError> {
    let (start, end) = find_object(raw)?;
    let value = pylit::parse(&raw[start..end]).map_err(|e| SynthError::Parse {
        offset: start + e.offset,
        message: e.message,
    })?;
    let mut list = &value;
    while let Some(inner) = list.get("qa") {
        list = inner;
    }
    let Value::Array(items) = list else {
        return Err(SynthError::Parse {
            offset: start,
            message: "object has no \"qa\" list".into(),
        });
    };
    let mut out = StructuredQa::default();
    for (index, item) in items.iter().enumerate() {
        let res = match schema {
            QaSchema::QaChoice => validate_choice(item).map(QaRecord::Choice),
            QaSchema::OpenQa => validate_open(item).map(QaRecord::Open),
        };
        match res {
            Ok(r) => out.items.push(r),
            Err(reason) => out.rejected.push(Rejection { index, reason }),
        }
    }
    Ok(out)
}
