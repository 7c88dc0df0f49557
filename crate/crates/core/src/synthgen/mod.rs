//! Synthetic instruction and conversation generation over a pluggable chat
//! client.
//!
//! Prompt templates live in `templates/` as plain text so they can be diffed
//! directly. [`ultrachat`] runs the user-simulation loop, [`structured`]
//! recovers QA items from model replies and [`job`] batches any recipe over a
//! JSONL corpus with retries and crash-safe resumption.

pub mod client;
pub mod job;
pub mod prompts;
pub mod structured;
pub mod translate;
pub mod ultrachat;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::CorpusError;

pub use client::{ChatClient, ClientError, FnClient, MockClient, RetryPolicy};
pub use job::{run_generation_job, JobRecipe, JobReport, JobSpec};
pub use prompts::{build_prompt, depth_methods, evolve, EvolveMode, Recipe};
pub use structured::{parse_structured_qa, QAChoiceItem, QAItem, QaRecord, QaSchema, Rejection, StructuredQa};
pub use translate::{LexiconTranslator, TranslationHook, WordlistHook};
pub use ultrachat::{ultrachat, UltrachatOptions, UltrachatOutcome};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("missing placeholder: {0}")]
    MissingPlaceholder(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("depth evolution requires a method")]
    MissingMethod,
    #[error("unparseable structured output at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SynthError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SynthError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Sampling parameters forwarded to the chat client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub top_p: f64,
    pub top_k: u32,
    pub temperature: f64,
    pub do_sample: bool,
    pub num_beams: u32,
    pub max_new_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            top_p: 0.95,
            top_k: 50,
            temperature: 0.9,
            do_sample: true,
            num_beams: 1,
            max_new_tokens: 1024,
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.do_sample && !(self.temperature > 0.0) {
            return bad("temperature must be positive when sampling");
        }
        if self.num_beams < 1 {
            return bad("num_beams must be at least 1");
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        GenerationParams::default().validate().unwrap();
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = GenerationParams { top_p: 0.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(SynthError::InvalidParams(_))));
        let p = GenerationParams { temperature: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = GenerationParams { temperature: 0.0, do_sample: false, ..Default::default() };
        assert!(p.validate().is_ok());
        let p = GenerationParams { num_beams: 0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
