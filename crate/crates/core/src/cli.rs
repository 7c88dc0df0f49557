//! The `corpuskit` command line.
//!
//! Exit codes: 0 on success (including `--help` and `--version`), 1 on
//! invalid arguments or configuration, 2 on runtime failures.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::chat_template::{self, Conversation};
use crate::error::{Error, Result};
use crate::eval::{load_questions, run_report, EvalConfig};
use crate::grammar_synth::{default_rules, generate_corpus, read_parses, read_rules};
use crate::packing::TailPolicy;
use crate::pipeline::{run_clean, run_dedup, run_pack, run_pipeline, CleanStage, DedupStage, PackStage, PipelineConfig};
use crate::synthgen::{
    run_generation_job, ChatClient, ClientError, EvolveMode, GenerationParams, JobRecipe, JobSpec, MockClient, QaSchema, Recipe,
    RetryPolicy, SynthError, WordlistHook,
};

#[derive(Debug, Parser)]
#[command(name = "corpuskit", version, about = "Malay LLM corpus preparation and evaluation", propagate_version = true)]
pub struct Cli {
    /// Worker threads (default: available parallelism). Outputs do not
    /// depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove near-duplicate documents with MinHash LSH.
    Dedup(DedupArgs),
    /// Drop HTTP-error and short documents, cap space and dot runs.
    Clean(CleanArgs),
    /// Tokenize and pack documents into fixed-length blocks.
    Pack(PackArgs),
    /// Render conversations to the chat template or parse them back.
    #[command(subcommand)]
    Template(TemplateCommand),
    /// Run a synthetic data generation job.
    Synth(SynthArgs),
    /// Generate grammar-error multiple-choice items from dependency parses.
    GrammarSynth(GrammarArgs),
    /// Evaluate a chat client on a multiple-choice benchmark.
    Eval(EvalArgs),
    /// Run clean, dedup and pack stages from a TOML config.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Cluster report (JSON).
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub num_perm: usize,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub ngram: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hash width, 32 or 64.
    #[arg(long, default_value_t = 64)]
    pub hash_bits: u32,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub min_chars: usize,
    #[arg(long, default_value_t = 6)]
    pub space_cap: usize,
    #[arg(long, default_value_t = 6)]
    pub dot_cap: usize,
    /// Pattern file, one substring per line.
    #[arg(long)]
    pub http_error_patterns: Option<PathBuf>,
    /// Write the report here instead of stderr.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 4096)]
    pub context_length: usize,
    /// `whitespace`, `whitespace:<vocab size>` or `external:<vocab file>`.
    #[arg(long, default_value = "whitespace")]
    pub tokenizer: String,
    #[arg(long, default_value = "drop")]
    pub keep_tail: TailPolicy,
}

#[derive(Debug, Subcommand)]
pub enum TemplateCommand {
    /// Conversation JSONL to `{"text": ...}` JSONL.
    Render(IoArgs),
    /// `{"text": ...}` JSONL back to conversation JSONL.
    Parse(IoArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClientKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    #[arg(long, value_enum, default_value_t = ClientKind::Mock)]
    pub client: ClientKind,
    /// Transcript of canned replies for the mock client.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// ultrachat, evolve-breadth, evolve-depth, code-instruct, qa-choice,
    /// open-qa, or a single-prompt recipe name.
    #[arg(long)]
    pub recipe: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub turns: usize,
    /// Evolve depth method; picked per record when omitted.
    #[arg(long)]
    pub method: Option<String>,
    /// Store a Malay rendering of every ultrachat turn.
    #[arg(long)]
    pub translate_all: bool,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub client: ClientArgs,
    /// Write the job report here instead of stderr.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GrammarArgs {
    /// CoNLL-U or four-column parse file.
    #[arg(long)]
    pub parses: PathBuf,
    /// Rule table; the shipped table when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub per_sentence: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub questions: PathBuf,
    /// Shot settings, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub shots: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label for the accuracy table row.
    #[arg(long, default_value = "model")]
    pub model: String,
    #[command(flatten)]
    pub client: ClientArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `input` from the config.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Overrides `workdir` from the config.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Overrides `manifest` from the config.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    if let Command::Pipeline(args) = cli.command {
        let mut cfg = PipelineConfig::load(&args.config)?;
        if let Some(i) = args.input {
            cfg.input = i;
        }
        if let Some(w) = args.workdir {
            cfg.workdir = w;
        }
        if args.manifest.is_some() {
            cfg.manifest = args.manifest;
        }
        if cli.threads.is_some() {
            cfg.threads = cli.threads;
        }
        let manifest = run_pipeline(&cfg)?;
        return emit_report(None, &manifest);
    }
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Dedup(a) => {
            let stage = DedupStage {
                num_perm: a.num_perm,
                threshold: a.threshold,
                ngram: a.ngram,
                seed: a.seed,
                hash_bits: a.hash_bits,
                clusters: a.clusters.clone(),
            };
            let r = run_dedup(&a.input, &a.output, a.clusters.as_deref(), &stage.config()?)?;
            emit_report(
                None,
                &json!({
                    "input_documents": r.input_documents,
                    "kept_documents": r.kept_documents,
                    "duplicate_clusters": r.duplicate_clusters.len(),
                    "bands": r.bands,
                    "rows": r.rows,
                }),
            )
        }
        Command::Clean(a) => {
            let stage = CleanStage {
                min_chars: a.min_chars,
                space_cap: a.space_cap,
                dot_cap: a.dot_cap,
                http_error_patterns: a.http_error_patterns,
            };
            let r = run_clean(&a.input, &a.output, &stage.config()?)?;
            emit_report(a.report.as_deref(), &r)
        }
        Command::Pack(a) => {
            let stage = PackStage {
                context_length: a.context_length,
                tokenizer: a.tokenizer,
                keep_tail: a.keep_tail,
            };
            let r = run_pack(&a.input, &a.output, &stage)?;
            emit_report(None, &r)
        }
        Command::Template(TemplateCommand::Render(a)) => template_render(&a.input, &a.output),
        Command::Template(TemplateCommand::Parse(a)) => template_parse(&a.input, &a.output),
        Command::Synth(a) => synth(a),
        Command::GrammarSynth(a) => grammar(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(_) => unreachable!("handled before the pool is built"),
    }
}

fn emit_report<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: "report".into(),
        source,
    })?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}

fn for_each_line(input: &Path, output: &Path, mut f: impl FnMut(usize, &str) -> Result<String>) -> Result<()> {
    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let out = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut out = BufWriter::new(out);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rendered = f(i + 1, &line)?;
        writeln!(out, "{rendered}").map_err(|e| Error::io(output, e))?;
    }
    out.flush().map_err(|e| Error::io(output, e))
}

fn json_err(input: &Path, line: usize) -> impl Fn(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        context: format!("{}:{line}", input.display()),
        source,
    }
}

/// Accepts `{"turns": [...]}` or a bare turn list per line.
fn template_render(input: &Path, output: &Path) -> Result<()> {
    for_each_line(input, output, |n, line| {
        let value: serde_json::Value = serde_json::from_str(line).map_err(json_err(input, n))?;
        let conv: Conversation = if value.is_array() {
            Conversation::new(serde_json::from_value(value).map_err(json_err(input, n))?)
        } else {
            serde_json::from_value(value).map_err(json_err(input, n))?
        };
        let text = chat_template::render(&conv)?;
        Ok(json!({ "text": text }).to_string())
    })
}

fn template_parse(input: &Path, output: &Path) -> Result<()> {
    for_each_line(input, output, |n, line| {
        let value: serde_json::Value = serde_json::from_str(line).map_err(json_err(input, n))?;
        let text = value.get("text").and_then(|t| t.as_str()).ok_or_else(|| Error::Json {
            context: format!("{}:{n}", input.display()),
            source: serde::de::Error::custom("missing string field \"text\""),
        })?;
        let conv = chat_template::parse(text)?;
        serde_json::to_string(&conv).map_err(json_err(input, n))
    })
}

fn make_client(args: &ClientArgs) -> Result<Box<dyn ChatClient>> {
    match args.client {
        ClientKind::Mock => Ok(Box::new(match &args.transcript {
            Some(p) => MockClient::from_transcript(p)?,
            None => MockClient::new(),
        })),
        #[cfg(feature = "http")]
        ClientKind::Http => Ok(Box::new(crate::synthgen::client::HttpClient::from_env()?)),
        #[cfg(not(feature = "http"))]
        ClientKind::Http => Err(Error::Config("built without the http feature".into())),
    }
}

fn parse_recipe(a: &SynthArgs) -> Result<JobRecipe> {
    let recipe = match a.recipe.replace('_', "-").as_str() {
        "ultrachat" => JobRecipe::Ultrachat {
            turns: a.turns,
            translate_all: a.translate_all,
        },
        "evolve" | "evolve-breadth" => JobRecipe::Evolve {
            mode: EvolveMode::Breadth,
            method: None,
        },
        "evolve-depth" => JobRecipe::Evolve {
            mode: EvolveMode::Depth,
            method: a.method.clone(),
        },
        "code-instruct" => JobRecipe::CodeInstruct,
        "qa-choice" => JobRecipe::Structured {
            schema: QaSchema::QaChoice,
        },
        "open-qa" => JobRecipe::Structured { schema: QaSchema::OpenQa },
        other => JobRecipe::Prompt {
            recipe: other.parse::<Recipe>().map_err(Error::Config)?,
        },
    };
    Ok(recipe)
}

fn synth(a: SynthArgs) -> Result<()> {
    let recipe = parse_recipe(&a)?;
    let mut params = GenerationParams::default();
    params.seed = a.seed;
    let spec = JobSpec {
        recipe,
        input: a.input.clone(),
        output: a.output.clone(),
        concurrency: a.concurrency,
        retry: RetryPolicy {
            retries: a.retries,
            ..RetryPolicy::default()
        },
        params,
    };
    let client = make_client(&a.client)?;
    let report = run_generation_job(&spec, &*client, &WordlistHook::new())?;
    emit_report(a.report.as_deref(), &report)?;
    if report.aborted {
        return Err(Error::Synth(SynthError::Client(ClientError::Fatal(format!(
            "job aborted after {} successes; rerun to resume",
            report.successes
        )))));
    }
    Ok(())
}

fn grammar(a: GrammarArgs) -> Result<()> {
    let rules = match &a.rules {
        Some(p) => read_rules(p)?,
        None => default_rules(),
    };
    let parses = read_parses(&a.parses)?;
    let (items, report) = generate_corpus(&parses, &rules, a.per_sentence, a.seed)?;
    let file = std::fs::File::create(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let mut out = BufWriter::new(file);
    for item in &items {
        let line = serde_json::to_string(item).map_err(json_err(&a.output, 0))?;
        writeln!(out, "{line}").map_err(|e| Error::io(&a.output, e))?;
    }
    out.flush().map_err(|e| Error::io(&a.output, e))?;
    emit_report(a.report.as_deref(), &report)
}

fn eval(a: EvalArgs) -> Result<()> {
    let questions = load_questions(&a.questions)?;
    let cfg = EvalConfig {
        samples_per_question: a.samples,
        seed: a.seed,
        concurrency: rayon::current_num_threads(),
        ..EvalConfig::default()
    };
    let client = make_client(&a.client)?;
    let report = run_report(&a.model, &questions, &cfg, &a.shots, &*client)?;
    for r in &report.results {
        eprintln!("{}-shot: {}/{} correct, {:.2}%", r.shots, r.correct, r.total, r.accuracy);
    }
    println!("{}", report.table_header);
    println!("{}", report.table_row);
    match &a.report {
        Some(p) => emit_report(Some(p), &report),
        None => Ok(()),
    }
}
