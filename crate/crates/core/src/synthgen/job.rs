//! Batch generation over a JSONL corpus.
//!
//! Records are processed in chunks by a bounded worker pool and appended to
//! the output in input order, one JSON line per success. Every client call a
//! record makes is logged; when a record fails, its log is kept in
//! `<output>.partial.jsonl` and replayed on the next run so no successful
//! call is ever issued twice. Records whose id already appears in the output
//! are skipped.
//!
//! A fatal client error stops the job after the current chunk. A hard kill
//! loses only the in-flight chunk's call logs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::client::{complete_with_retry, messages_digest, ChatClient, ClientError, RetryPolicy};
use super::prompts::{build_prompt, depth_methods, evolve, EvolveMode, Recipe};
use super::structured::{parse_structured_qa, QaSchema};
use super::translate::TranslationHook;
use super::ultrachat::{ultrachat, UltrachatOptions};
use super::{GenerationParams, SynthError};
use crate::chat_template::Turn;
use crate::corpus_io::{read_stream, Document};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobRecipe {
    /// `meta.question` seeds the conversation; without it a question is
    /// generated from the paragraph first.
    Ultrachat {
        turns: usize,
        #[serde(default)]
        translate_all: bool,
    },
    /// Rewrites the record text, then answers the rewritten instruction.
    /// Depth mode without a method picks one from the shipped list by id.
    Evolve { mode: EvolveMode, method: Option<String> },
    /// Translates a coding instruction, then answers it.
    CodeInstruct,
    Structured { schema: QaSchema },
    /// One call on a single-prompt recipe; `text` fills the first
    /// placeholder and `meta` the rest.
    Prompt { recipe: Recipe },
}

impl JobRecipe {
    pub fn name(&self) -> String {
        match self {
            JobRecipe::Ultrachat { .. } => "ultrachat".into(),
            JobRecipe::Evolve { mode: EvolveMode::Breadth, .. } => "evolve_breadth".into(),
            JobRecipe::Evolve { mode: EvolveMode::Depth, .. } => "evolve_depth".into(),
            JobRecipe::CodeInstruct => "code_instruct".into(),
            JobRecipe::Structured { schema: QaSchema::QaChoice } => "qa_choice".into(),
            JobRecipe::Structured { schema: QaSchema::OpenQa } => "open_qa".into(),
            JobRecipe::Prompt { recipe } => recipe.name().into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobSpec {
    pub recipe: JobRecipe,
    pub input: PathBuf,
    pub output: PathBuf,
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobReport {
    /// Records not already present in the output.
    pub inputs: usize,
    pub skipped_existing: usize,
    pub successes: usize,
    pub failures: usize,
    /// Saved turns or fields flagged as Indonesian.
    pub indon_translations: usize,
    /// Calls that reached the client, retries included.
    pub client_calls: usize,
    /// Calls answered from a previous run's log.
    pub replayed_calls: usize,
    pub aborted: bool,
    pub failed_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CallEntry {
    digest: String,
    reply: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartialLog {
    id: String,
    calls: Vec<CallEntry>,
}

pub fn partial_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".partial.jsonl");
    PathBuf::from(name)
}

struct RecorderState {
    cursor: usize,
    diverged: bool,
    log: Vec<CallEntry>,
}

/// Per-record client wrapper: replays a prior log, then retries and logs
/// live calls.
struct Recorder<'a> {
    inner: &'a dyn ChatClient,
    policy: RetryPolicy,
    replay: Vec<CallEntry>,
    state: Mutex<RecorderState>,
    calls: &'a AtomicUsize,
    replayed: &'a AtomicUsize,
    abort: &'a AtomicBool,
}

impl ChatClient for Recorder<'_> {
    fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
        let digest = messages_digest(messages);
        let mut st = self.state.lock().unwrap();
        let k = st.cursor;
        st.cursor += 1;
        if !st.diverged {
            match self.replay.get(k) {
                Some(e) if e.digest == digest => {
                    st.log.push(e.clone());
                    self.replayed.fetch_add(1, Ordering::SeqCst);
                    return Ok(e.reply.clone());
                }
                _ => st.diverged = true,
            }
        }
        if self.abort.load(Ordering::SeqCst) {
            return Err(ClientError::Fatal("job aborted".into()));
        }
        let (res, attempts) = complete_with_retry(self.inner, messages, params, self.policy);
        self.calls.fetch_add(attempts as usize, Ordering::SeqCst);
        match &res {
            Ok(reply) => st.log.push(CallEntry {
                digest,
                reply: reply.clone(),
            }),
            Err(ClientError::Fatal(_)) => self.abort.store(true, Ordering::SeqCst),
            Err(ClientError::Transient(_)) => {}
        }
        res
    }
}

enum Outcome {
    Success { value: Value, indon: usize },
    /// `keep_log` is false when replaying the log would reproduce the failure.
    Failure { keep_log: bool },
}

fn annotate(hook: &dyn TranslationHook, text: &str) -> (bool, Option<String>) {
    if hook.detect_indonesian(text) {
        (true, Some(hook.translate_to_malay(text)))
    } else {
        (false, None)
    }
}

fn one(client: &dyn ChatClient, turns: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
    client.complete(turns, params)
}

fn pick_method(id: &str) -> &'static str {
    let methods = depth_methods();
    let h = id.bytes().fold(0x811c_9dc5u32, |h, b| (h ^ b as u32).wrapping_mul(0x0100_0193));
    methods[h as usize % methods.len()]
}

fn prompt_inputs(doc: &Document, recipe: Recipe) -> BTreeMap<String, String> {
    let mut inputs: BTreeMap<String, String> = doc.meta.clone();
    inputs.insert(recipe.primary_placeholder().to_string(), doc.text.clone());
    inputs
}

fn process(
    doc: &Document,
    recipe: &JobRecipe,
    client: &dyn ChatClient,
    params: &GenerationParams,
    hook: &dyn TranslationHook,
) -> Result<Outcome, SynthError> {
    let fail = |_: ClientError| Outcome::Failure { keep_log: true };
    Ok(match recipe {
        JobRecipe::Ultrachat { turns, translate_all } => {
            let question = match doc.meta.get("question") {
                Some(q) => q.clone(),
                None => {
                    let inputs = prompt_inputs(doc, Recipe::QuestionFromContext);
                    match one(client, &build_prompt(Recipe::QuestionFromContext, &inputs)?, params) {
                        Ok(q) => q.trim().to_string(),
                        Err(e) => return Ok(fail(e)),
                    }
                }
            };
            let opts = UltrachatOptions {
                turns: *turns,
                params: params.clone(),
                translate_all: *translate_all,
            };
            let out = ultrachat(&doc.text, &question, client, &opts, hook);
            if let Some(e) = out.error {
                return Ok(fail(e));
            }
            let indon = out.conversation.turns.iter().filter(|t| t.indon == Some(true)).count();
            Outcome::Success {
                value: json!({ "conversation": out.conversation.turns }),
                indon,
            }
        }
        JobRecipe::Evolve { mode, method } => {
            let method = match (mode, method) {
                (EvolveMode::Depth, None) => Some(pick_method(&doc.id)),
                (_, m) => m.as_deref(),
            };
            let instruction = match one(client, &evolve(&doc.text, *mode, method)?, params) {
                Ok(s) => s.trim().to_string(),
                Err(e) => return Ok(fail(e)),
            };
            let output = match one(client, &[Turn::user(instruction.clone())], params) {
                Ok(s) => s,
                Err(e) => return Ok(fail(e)),
            };
            let (indon_ins, instruction_ms) = annotate(hook, &instruction);
            let (indon_output, output_ms) = annotate(hook, &output);
            Outcome::Success {
                value: json!({
                    "seed": doc.text,
                    "method": method,
                    "instruction": instruction,
                    "output": output,
                    "indon_ins": indon_ins,
                    "indon_output": indon_output,
                    "instruction_ms": instruction_ms,
                    "output_ms": output_ms,
                }),
                indon: indon_ins as usize + indon_output as usize,
            }
        }
        JobRecipe::CodeInstruct => {
            let inputs = prompt_inputs(doc, Recipe::CodeTranslate);
            let ins = match one(client, &build_prompt(Recipe::CodeTranslate, &inputs)?, params) {
                Ok(s) => s,
                Err(e) => return Ok(fail(e)),
            };
            let inputs = BTreeMap::from([("ins".to_string(), ins.clone())]);
            let answer = match one(client, &build_prompt(Recipe::CodeAnswer, &inputs)?, params) {
                Ok(s) => s,
                Err(e) => return Ok(fail(e)),
            };
            let (indon, answer_ms) = annotate(hook, &answer);
            Outcome::Success {
                value: json!({
                    "instruction": doc.text,
                    "ins": ins,
                    "answer": answer,
                    "indon": indon,
                    "answer_ms": answer_ms,
                }),
                indon: indon as usize,
            }
        }
        JobRecipe::Structured { schema } => {
            let recipe = match schema {
                QaSchema::QaChoice => Recipe::QaChoice,
                QaSchema::OpenQa => Recipe::OpenQa,
            };
            let inputs = prompt_inputs(doc, recipe);
            let raw = match one(client, &build_prompt(recipe, &inputs)?, params) {
                Ok(s) => s,
                Err(e) => return Ok(fail(e)),
            };
            match parse_structured_qa(&raw, *schema) {
                Ok(qa) => Outcome::Success {
                    value: json!({ "paragraph": doc.text, "qa": qa.items, "rejected": qa.rejected }),
                    indon: 0,
                },
                Err(_) => Outcome::Failure { keep_log: false },
            }
        }
        JobRecipe::Prompt { recipe } => {
            let prompt = build_prompt(*recipe, &prompt_inputs(doc, *recipe))?;
            let reply = match one(client, &prompt, params) {
                Ok(s) => s,
                Err(e) => return Ok(fail(e)),
            };
            let (indon, reply_ms) = annotate(hook, &reply);
            Outcome::Success {
                value: json!({
                    "prompt": prompt[0].content,
                    "reply": reply,
                    "indon": indon,
                    "reply_ms": reply_ms,
                }),
                indon: indon as usize,
            }
        }
    })
}

fn existing_ids(path: &Path) -> Result<HashSet<String>, SynthError> {
    let mut ids = HashSet::new();
    let Ok(file) = File::open(path) else {
        return Ok(ids);
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| SynthError::io(path, e))?;
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(&line) {
            if let Some(Value::String(id)) = obj.get("id") {
                ids.insert(id.clone());
            }
        }
    }
    Ok(ids)
}

fn load_partials(path: &Path) -> Result<HashMap<String, Vec<CallEntry>>, SynthError> {
    let mut map = HashMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(map);
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| SynthError::io(path, e))?;
        if let Ok(p) = serde_json::from_str::<PartialLog>(&line) {
            map.insert(p.id, p.calls);
        }
    }
    Ok(map)
}

fn save_partials(path: &Path, partials: &HashMap<String, Vec<CallEntry>>) -> Result<(), SynthError> {
    if partials.is_empty() {
        return match std::fs::remove_file(path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(SynthError::io(path, e)),
            _ => Ok(()),
        };
    }
    let mut ids: Vec<&String> = partials.keys().collect();
    ids.sort();
    let mut out = BufWriter::new(File::create(path).map_err(|e| SynthError::io(path, e))?);
    for id in ids {
        let line = serde_json::to_string(&PartialLog {
            id: id.clone(),
            calls: partials[id].clone(),
        })
        .expect("serializable");
        writeln!(out, "{line}").map_err(|e| SynthError::io(path, e))?;
    }
    out.flush().map_err(|e| SynthError::io(path, e))
}

pub fn run_generation_job(
    spec: &JobSpec,
    client: &dyn ChatClient,
    hook: &dyn TranslationHook,
) -> Result<JobReport, SynthError> {
    spec.params.validate()?;
    if spec.concurrency == 0 {
        return Err(SynthError::InvalidParams("concurrency must be at least 1".into()));
    }
    let done = existing_ids(&spec.output)?;
    let partial_file = partial_path(&spec.output);
    let mut partials = load_partials(&partial_file)?;

    let mut report = JobReport::default();
    let mut pending = Vec::new();
    for doc in read_stream(&spec.input)? {
        let doc = doc?;
        if done.contains(&doc.id) {
            report.skipped_existing += 1;
        } else {
            pending.push(doc);
        }
    }
    report.inputs = pending.len();

    let out_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&spec.output)
        .map_err(|e| SynthError::io(&spec.output, e))?;
    let mut out = BufWriter::new(out_file);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.concurrency)
        .build()
        .map_err(|e| SynthError::InvalidParams(e.to_string()))?;

    let calls = AtomicUsize::new(0);
    let replayed = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let recipe_name = spec.recipe.name();
    let chunk_size = spec.concurrency * 4;

    let mut processed = 0;
    for chunk in pending.chunks(chunk_size) {
        if abort.load(Ordering::SeqCst) {
            break;
        }
        let results: Vec<Result<(Outcome, Vec<CallEntry>), SynthError>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|doc| {
                    let rec = Recorder {
                        inner: client,
                        policy: spec.retry,
                        replay: partials.get(&doc.id).cloned().unwrap_or_default(),
                        state: Mutex::new(RecorderState {
                            cursor: 0,
                            diverged: false,
                            log: Vec::new(),
                        }),
                        calls: &calls,
                        replayed: &replayed,
                        abort: &abort,
                    };
                    let outcome = process(doc, &spec.recipe, &rec, &spec.params, hook)?;
                    Ok((outcome, rec.state.into_inner().unwrap().log))
                })
                .collect()
        });
        for (doc, res) in chunk.iter().zip(results) {
            processed += 1;
            match res? {
                (Outcome::Success { value, indon }, _) => {
                    let line = json!({ "id": doc.id, "recipe": recipe_name, "output": value });
                    writeln!(out, "{line}").map_err(|e| SynthError::io(&spec.output, e))?;
                    partials.remove(&doc.id);
                    report.successes += 1;
                    report.indon_translations += indon;
                }
                (Outcome::Failure { keep_log }, log) => {
                    if keep_log && !log.is_empty() {
                        partials.insert(doc.id.clone(), log);
                    } else {
                        partials.remove(&doc.id);
                    }
                    report.failures += 1;
                    report.failed_ids.push(doc.id.clone());
                }
            }
        }
        out.flush().map_err(|e| SynthError::io(&spec.output, e))?;
    }
    for doc in &pending[processed..] {
        report.failures += 1;
        report.failed_ids.push(doc.id.clone());
    }
    save_partials(&partial_file, &partials)?;
    report.aborted = abort.load(Ordering::SeqCst);
    report.client_calls = calls.load(Ordering::SeqCst);
    report.replayed_calls = replayed.load(Ordering::SeqCst);
    Ok(report)
}
