//! Prompt builders for the single-call recipes and Evol-Instruct.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::chat_template::Turn;

pub const EVOL_BREADTH: &str = include_str!("../../templates/evol_breadth.txt");
pub const EVOL_DEPTH: &str = include_str!("../../templates/evol_depth.txt");
pub const EVOL_DEPTH_METHODS: &str = include_str!("../../templates/evol_depth_methods.txt");
pub const ULTRACHAT_SYSTEM: &str = include_str!("../../templates/ultrachat_system.txt");
pub const ULTRACHAT_CONTINUE: &str = include_str!("../../templates/ultrachat_continue.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    CodeTranslate,
    CodeAnswer,
    Commonsense,
    MalaysianQa,
    AyatPasif,
    Kertas1,
    QaChoice,
    OpenQa,
    QuestionFromContext,
}

impl Recipe {
    pub const ALL: [Recipe; 9] = [
        Recipe::CodeTranslate,
        Recipe::CodeAnswer,
        Recipe::Commonsense,
        Recipe::MalaysianQa,
        Recipe::AyatPasif,
        Recipe::Kertas1,
        Recipe::QaChoice,
        Recipe::OpenQa,
        Recipe::QuestionFromContext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::CodeTranslate => "code_translate",
            Recipe::CodeAnswer => "code_answer",
            Recipe::Commonsense => "commonsense",
            Recipe::MalaysianQa => "malaysian_qa",
            Recipe::AyatPasif => "ayat_pasif",
            Recipe::Kertas1 => "kertas1",
            Recipe::QaChoice => "qa_choice",
            Recipe::OpenQa => "open_qa",
            Recipe::QuestionFromContext => "question_from_context",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            Recipe::CodeTranslate => include_str!("../../templates/code_translate.txt"),
            Recipe::CodeAnswer => include_str!("../../templates/code_answer.txt"),
            Recipe::Commonsense => include_str!("../../templates/commonsense.txt"),
            Recipe::MalaysianQa => include_str!("../../templates/malaysian_qa.txt"),
            Recipe::AyatPasif => include_str!("../../templates/ayat_pasif.txt"),
            Recipe::Kertas1 => include_str!("../../templates/kertas1.txt"),
            Recipe::QaChoice => include_str!("../../templates/qa_choice.txt"),
            Recipe::OpenQa => include_str!("../../templates/open_qa.txt"),
            Recipe::QuestionFromContext => include_str!("../../templates/question_from_context.txt"),
        }
    }

    /// Placeholder names in template order, without duplicates.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut names = Vec::new();
        for c in placeholder_re().captures_iter(self.template()) {
            let name = c.get(1).unwrap().as_str();
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    /// The placeholder a corpus record's `text` fills.
    pub fn primary_placeholder(self) -> &'static str {
        self.placeholders()[0]
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.replace('-', "_");
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == norm)
            .ok_or_else(|| format!("unknown recipe {s:?}"))
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

/// Substitutes `{name}` placeholders in one pass; values are not re-scanned.
pub fn fill_template(template: &str, inputs: &BTreeMap<String, String>) -> Result<String, SynthError> {
    let re = placeholder_re();
    if let Some(missing) = re
        .captures_iter(template)
        .map(|c| c.get(1).unwrap().as_str())
        .find(|name| !inputs.contains_key(*name))
    {
        return Err(SynthError::MissingPlaceholder(missing.to_string()));
    }
    Ok(re
        .replace_all(template, |c: &regex::Captures| inputs[&c[1]].clone())
        .into_owned())
}

/// Builds the single user turn for `recipe`.
pub fn build_prompt(recipe: Recipe, inputs: &BTreeMap<String, String>) -> Result<Vec<Turn>, SynthError> {
    Ok(vec![Turn::user(fill_template(recipe.template(), inputs)?)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolveMode {
    Breadth,
    Depth,
}

impl FromStr for EvolveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "breadth" => Ok(EvolveMode::Breadth),
            "depth" => Ok(EvolveMode::Depth),
            other => Err(format!("expected breadth or depth, got {other:?}")),
        }
    }
}

/// The shipped depth methods, one per line.
pub fn depth_methods() -> Vec<&'static str> {
    EVOL_DEPTH_METHODS.lines().filter(|l| !l.trim().is_empty()).collect()
}

/// Builds an Evol-Instruct rewriting prompt around `instruction`.
pub fn evolve(instruction: &str, mode: EvolveMode, method: Option<&str>) -> Result<Vec<Turn>, SynthError> {
    let text = match mode {
        EvolveMode::Breadth => {
            format!("{EVOL_BREADTH}\n#Given Prompt#:\n{instruction}\n#Created Prompt#:\n")
        }
        EvolveMode::Depth => {
            let method = method.ok_or(SynthError::MissingMethod)?;
            let body = EVOL_DEPTH.replacen("{}", method, 1);
            format!("{body}\n#The Given Prompt#:\n{instruction}\n#Rewritten Prompt#:\n")
        }
    };
    Ok(vec![Turn::user(text)])
}
