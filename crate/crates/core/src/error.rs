use std::path::PathBuf;

use thiserror::Error;

use crate::chat_template::TemplateError;
use crate::corpus_io::CorpusError;
use crate::dedup::DedupError;
use crate::eval::EvalError;
use crate::grammar_synth::GrammarError;
use crate::packing::PackError;
use crate::synthgen::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for pipeline and CLI code paths.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("dedup: {0}")]
    Dedup(#[from] DedupError),
    #[error("pack: {0}")]
    Pack(#[from] PackError),
    #[error("template: {0}")]
    Template(#[from] TemplateError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("grammar-synth: {0}")]
    Grammar(#[from] GrammarError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    /// Invalid configuration or arguments; maps to exit code 1.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user-supplied configuration rather than
    /// from processing.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Dedup(e) => matches!(e, DedupError::InvalidConfig(_)),
            Error::Pack(e) => matches!(e, PackError::ContextTooShort(_) | PackError::UnknownTokenizer(_)),
            Error::Synth(e) => matches!(
                e,
                SynthError::MissingPlaceholder(_) | SynthError::InvalidParams(_) | SynthError::MissingMethod
            ),
            Error::Eval(e) => matches!(e, EvalError::InvalidConfig(_)),
            Error::Grammar(e) => matches!(e, GrammarError::Rules(_) | GrammarError::PoolTooSmall { .. }),
            _ => false,
        }
    }
}
