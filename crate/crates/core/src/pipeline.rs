//! Chained clean → dedup → pack runs driven by a TOML file.
//!
//! ```toml
//! input = "corpus.jsonl"
//! workdir = "work"
//! manifest = "work/manifest.json"
//!
//! [[stage]]
//! kind = "clean"
//! min_chars = 3
//!
//! [[stage]]
//! kind = "dedup"
//! threshold = 0.95
//!
//! [[stage]]
//! kind = "pack"
//! context_length = 4096
//! ```
//!
//! Stage `i` (1-based) reads the previous stage's output and writes
//! `<workdir>/<ii>-<kind>.jsonl` (`.bin` for pack). Stage options carry the
//! same names as the subcommand flags. The manifest echoes the config and
//! records per-stage counts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus_io::{read_all, read_stream, write_stream, DatasetStats, DocumentWriter};
use crate::dedup::{dedup_corpus, ClusterReport, DedupConfig, HashBits};
use crate::error::{Error, Result};
use crate::packing::{pack_file, tokenizer_from_spec, PackStats, TailPolicy, CONTEXT_4K};
use crate::postprocess::{clean_document, load_patterns, CleanConfig, CleanReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanStage {
    #[serde(default = "d_min_chars")]
    pub min_chars: usize,
    #[serde(default = "d_cap")]
    pub space_cap: usize,
    #[serde(default = "d_cap")]
    pub dot_cap: usize,
    /// Pattern file replacing the built-in HTTP error list.
    #[serde(default)]
    pub http_error_patterns: Option<PathBuf>,
}

fn d_min_chars() -> usize {
    3
}

fn d_cap() -> usize {
    6
}

impl Default for CleanStage {
    fn default() -> Self {
        CleanStage {
            min_chars: d_min_chars(),
            space_cap: d_cap(),
            dot_cap: d_cap(),
            http_error_patterns: None,
        }
    }
}

impl CleanStage {
    pub fn config(&self) -> Result<CleanConfig> {
        let mut cfg = CleanConfig {
            min_chars: self.min_chars,
            max_space_run: self.space_cap,
            max_dot_run: self.dot_cap,
            ..CleanConfig::default()
        };
        if let Some(path) = &self.http_error_patterns {
            cfg.http_error_patterns = load_patterns(path).map_err(|e| Error::io(path, e))?;
        }
        cfg.validate().map_err(Error::Config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupStage {
    #[serde(default = "d_num_perm")]
    pub num_perm: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_ngram")]
    pub ngram: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_hash_bits")]
    pub hash_bits: u32,
    /// Where to write the cluster report; none skips it.
    #[serde(default)]
    pub clusters: Option<PathBuf>,
}

fn d_num_perm() -> usize {
    256
}

fn d_threshold() -> f64 {
    0.95
}

fn d_ngram() -> usize {
    5
}

fn d_hash_bits() -> u32 {
    64
}

impl Default for DedupStage {
    fn default() -> Self {
        DedupStage {
            num_perm: d_num_perm(),
            threshold: d_threshold(),
            ngram: d_ngram(),
            seed: 0,
            hash_bits: d_hash_bits(),
            clusters: None,
        }
    }
}

impl DedupStage {
    pub fn config(&self) -> Result<DedupConfig> {
        let hash_bits = match self.hash_bits {
            32 => HashBits::B32,
            64 => HashBits::B64,
            n => return Err(Error::Config(format!("hash_bits must be 32 or 64, got {n}"))),
        };
        let cfg = DedupConfig {
            num_perm: self.num_perm,
            threshold: self.threshold,
            hash_bits,
            shingle_n: self.ngram,
            seed: self.seed,
            ..DedupConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackStage {
    #[serde(default = "d_context")]
    pub context_length: usize,
    #[serde(default = "d_tokenizer")]
    pub tokenizer: String,
    #[serde(default)]
    pub keep_tail: TailPolicy,
}

fn d_context() -> usize {
    CONTEXT_4K
}

fn d_tokenizer() -> String {
    "whitespace".into()
}

impl Default for PackStage {
    fn default() -> Self {
        PackStage {
            context_length: d_context(),
            tokenizer: d_tokenizer(),
            keep_tail: TailPolicy::Drop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stage {
    Clean(CleanStage),
    Dedup(DedupStage),
    Pack(PackStage),
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::Clean(_) => "clean",
            Stage::Dedup(_) => "dedup",
            Stage::Pack(_) => "pack",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub workdir: PathBuf,
    /// Defaults to `<workdir>/manifest.json`.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(rename = "stage")]
    pub stages: Vec<Stage>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Every stage but the last must emit documents, so pack may only end
    /// the chain.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("pipeline has no stages".into()));
        }
        if let Some(i) = self.stages[..self.stages.len() - 1]
            .iter()
            .position(|s| matches!(s, Stage::Pack(_)))
        {
            return Err(Error::Config(format!(
                "stage {} is pack but is followed by another stage; pack must be last",
                i + 1
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.workdir.join("manifest.json"))
    }

    pub fn stage_output(&self, index: usize) -> PathBuf {
        let stage = &self.stages[index];
        let ext = if matches!(stage, Stage::Pack(_)) { "bin" } else { "jsonl" };
        self.workdir.join(format!("{:02}-{}.{ext}", index + 1, stage.kind()))
    }
}

/// Streams `input` through the cleaning rules into `output`.
pub fn run_clean(input: &Path, output: &Path, cfg: &CleanConfig) -> Result<CleanReport> {
    let mut writer = DocumentWriter::create(output)?;
    let mut report = CleanReport::default();
    for doc in read_stream(input)? {
        let (kept, r) = clean_document(doc?, cfg);
        report = report.merge(r);
        if let Some(d) = kept {
            writer.write(&d)?;
        }
    }
    writer.finish()?;
    Ok(report)
}

/// Keeps the first document of every near-duplicate cluster, in input order.
pub fn run_dedup(input: &Path, output: &Path, clusters: Option<&Path>, cfg: &DedupConfig) -> Result<ClusterReport> {
    let docs = read_all(input)?;
    let found = dedup_corpus(&docs, cfg)?;
    let kept: HashSet<&str> = found.kept_set();
    write_stream(docs.iter().filter(|d| kept.contains(d.id.as_str())), output)?;
    let report = ClusterReport::new(cfg, &found);
    if let Some(path) = clusters {
        write_json(path, &report)?;
    }
    Ok(report)
}

pub fn run_pack(input: &Path, output: &Path, stage: &PackStage) -> Result<PackStats> {
    let tok = tokenizer_from_spec(&stage.tokenizer)?;
    Ok(pack_file(input, output, &*tok, &stage.tokenizer, stage.context_length, stage.keep_tail)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StageReport {
    Clean(CleanReport),
    Dedup {
        input_documents: usize,
        kept_documents: usize,
        duplicate_clusters: usize,
        bands: usize,
        rows: usize,
    },
    Pack(PackStats),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub input: PathBuf,
    pub output: PathBuf,
    pub input_records: usize,
    /// Documents written; for pack, blocks written.
    pub output_records: usize,
    pub report: StageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub config: PipelineConfig,
    pub input_stats: DatasetStats,
    pub stages: Vec<StageRecord>,
    pub final_output: PathBuf,
}

impl PipelineManifest {
    /// Checks that every stage's counts add up and that each stage consumed
    /// exactly what the previous one produced.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut expected_in = self.input_stats.record_count;
        for (i, st) in self.stages.iter().enumerate() {
            let n = i + 1;
            if st.input_records != expected_in {
                return Err(format!("stage {n} read {} records, previous stage wrote {expected_in}", st.input_records));
            }
            match &st.report {
                StageReport::Clean(r) => {
                    if r.input_count() != st.input_records || r.kept != st.output_records {
                        return Err(format!("stage {n}: clean counts do not add up"));
                    }
                }
                StageReport::Dedup {
                    input_documents,
                    kept_documents,
                    duplicate_clusters,
                    ..
                } => {
                    if *input_documents != st.input_records
                        || *kept_documents != st.output_records
                        || kept_documents > input_documents
                        || input_documents - kept_documents < *duplicate_clusters
                    {
                        return Err(format!("stage {n}: dedup counts do not add up"));
                    }
                }
                StageReport::Pack(p) => {
                    let cfg_len = match self.config.stages.get(i) {
                        Some(Stage::Pack(s)) => s.context_length,
                        _ => return Err(format!("stage {n}: pack report for a non-pack stage")),
                    };
                    if p.docs_consumed != st.input_records
                        || p.sequences != st.output_records
                        || p.tokens_emitted != p.sequences * cfg_len
                        || (p.tokens_dropped_tail >= cfg_len && p.tokens_dropped_tail > 0)
                    {
                        return Err(format!("stage {n}: pack counts do not add up"));
                    }
                }
            }
            expected_in = st.output_records;
        }
        Ok(())
    }
}

fn count_stats(path: &Path) -> Result<DatasetStats> {
    let mut acc = crate::corpus_io::StatsAccumulator::default();
    for doc in read_stream(path)? {
        acc.observe(&doc?.text);
    }
    Ok(acc.finish())
}

/// Runs every stage in order and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineManifest> {
    cfg.validate()?;
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_stages(cfg))
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineManifest> {
    std::fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))?;
    let input_stats = count_stats(&cfg.input)?;
    let mut current = cfg.input.clone();
    let mut records = input_stats.record_count;
    let mut stages = Vec::with_capacity(cfg.stages.len());
    for (i, stage) in cfg.stages.iter().enumerate() {
        let output = cfg.stage_output(i);
        let (out_records, report) = match stage {
            Stage::Clean(s) => {
                let r = run_clean(&current, &output, &s.config()?)?;
                (r.kept, StageReport::Clean(r))
            }
            Stage::Dedup(s) => {
                let r = run_dedup(&current, &output, s.clusters.as_deref(), &s.config()?)?;
                let report = StageReport::Dedup {
                    input_documents: r.input_documents,
                    kept_documents: r.kept_documents,
                    duplicate_clusters: r.duplicate_clusters.len(),
                    bands: r.bands,
                    rows: r.rows,
                };
                (r.kept_documents, report)
            }
            Stage::Pack(s) => {
                let r = run_pack(&current, &output, s)?;
                (r.sequences, StageReport::Pack(r))
            }
        };
        stages.push(StageRecord {
            input: current.clone(),
            output: output.clone(),
            input_records: records,
            output_records: out_records,
            report,
        });
        current = output;
        records = out_records;
    }
    let manifest = PipelineManifest {
        config: cfg.clone(),
        input_stats,
        stages,
        final_output: current,
    };
    write_json(&cfg.manifest_path(), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_must_be_last() {
        let text = r#"
            input = "a.jsonl"
            workdir = "w"
            [[stage]]
            kind = "pack"
            [[stage]]
            kind = "clean"
        "#;
        let err = PipelineConfig::from_toml(text).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("pack must be last"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
            input = "a.jsonl"
            workdir = "w"
            [[stage]]
            kind = "clean"
            min_char = 3
        "#;
        assert!(PipelineConfig::from_toml(text).unwrap_err().to_string().contains("min_char"));
        let text = "input = \"a\"\nworkdir = \"w\"\nextra = 1\n[[stage]]\nkind = \"dedup\"\n";
        assert!(PipelineConfig::from_toml(text).is_err());
    }

    #[test]
    fn stage_paths() {
        let text = "input = \"a\"\nworkdir = \"w\"\n[[stage]]\nkind = \"clean\"\n[[stage]]\nkind = \"pack\"\n";
        let cfg = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(cfg.stage_output(0), Path::new("w/01-clean.jsonl"));
        assert_eq!(cfg.stage_output(1), Path::new("w/02-pack.bin"));
        assert_eq!(cfg.manifest_path(), Path::new("w/manifest.json"));
        assert_eq!(cfg.stages[1], Stage::Pack(PackStage::default()));
    }
}
