//! Corpus preparation and evaluation toolkit for Malay language-model data.
//!
//! The crate covers the whole data path of a continued-pretraining and
//! instruction-tuning run at desk scale:
//!
//! - [`corpus_io`]: streaming JSONL ingestion and persistence of [`Document`]s.
//! - [`dedup`]: MinHash signatures, LSH banding and union-find clustering of
//!   near-duplicates.
//! - [`postprocess`]: HTTP-error and length filters plus space/dot run
//!   normalisation.
//! - [`packing`]: EOS-separated sequence packing into fixed-length blocks.
//! - [`chat_template`]: Mistral `[INST]` template rendering and parsing.
//! - [`synthgen`]: prompt recipes, Evol-Instruct rewriters, the UltraChat loop,
//!   structured QA extraction and a resumable generation job runner over a
//!   pluggable [`synthgen::ChatClient`].
//! - [`grammar_synth`]: grammar-error items built by positional swaps and
//!   substitutions over dependency parses.
//! - [`eval`]: n-shot multiple-choice harness with best-of-k majority voting.
//! - [`pipeline`]: clean → dedup → pack chaining from a TOML config.
//! - [`cli`]: the `corpuskit` command line.
//!
//! Every capability has a runnable program under `examples/`.

pub mod chat_template;
pub mod cli;
pub mod corpus_io;
pub mod dedup;
pub mod error;
pub mod eval;
pub mod grammar_synth;
pub mod packing;
pub mod pipeline;
pub mod postprocess;
pub mod pylit;
pub mod synthgen;

pub use corpus_io::{DatasetStats, Document};
pub use error::{Error, Result};
