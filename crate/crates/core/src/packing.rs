//! EOS-separated sequence packing.
//!
//! Documents are tokenised, each followed by the end-of-sequence id, and the
//! resulting stream `enc(d1) eos enc(d2) eos ...` is cut greedily into blocks
//! of exactly `context_length` tokens. A causal LM trained on these blocks
//! maximises `P(x_1..x_T) = prod_t P(x_t | x_<t)` over each block, with the
//! EOS ids marking where one document ends and the next begins. Documents may
//! straddle block boundaries. The final partial block is dropped by default.
//!
//! On disk, blocks are stored as a little-endian `u32` length followed by that
//! many little-endian `u32` token ids, plus a JSON sidecar manifest holding
//! the statistics and per-block source spans.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{read_stream, CorpusError, Document};

pub const CONTEXT_4K: usize = 4096;
pub const CONTEXT_32K: usize = 32768;
/// Span id used for padding tokens when the tail is padded.
pub const PAD_SPAN_ID: &str = "<pad>";

const ENCODE_BATCH: usize = 4096;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("context length must be at least 2, got {0}")]
    ContextTooShort(usize),
    #[error("tokenizer failed on document {doc_id:?}: {source}")]
    Tokenize {
        doc_id: String,
        #[source]
        source: TokenizeError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: truncated block file")]
    Truncated { path: PathBuf },
    #[error("unknown tokenizer {0:?}; expected whitespace[:<vocab size>] or external:<vocab file>")]
    UnknownTokenizer(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("unknown token id {0}")]
    UnknownId(u32),
    #[error("token id {0} maps to several words")]
    AmbiguousId(u32),
    #[error("{0}")]
    Other(String),
}

pub trait Tokenizer: Sync {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizeError>;
    fn decode(&self, ids: &[u32]) -> Result<String, TokenizeError>;
    fn eos_id(&self) -> u32;
    fn vocab_size(&self) -> u32;

    fn pad_id(&self) -> u32 {
        self.eos_id()
    }
}

/// Whitespace tokenizer with a hash-bucketed vocabulary.
///
/// Ids 0, 1 and 2 are reserved for unk, bos and eos. Every other word maps to
/// `3 + fnv1a32(word) % (vocab_size - 3)`. Decoding uses a table of words
/// seen during encoding; an id shared by two distinct words fails to decode.
#[derive(Debug)]
pub struct WhitespaceTokenizer {
    vocab_size: u32,
    seen: RwLock<HashMap<u32, BTreeSet<String>>>,
}

const RESERVED: u32 = 3;

impl WhitespaceTokenizer {
    pub fn new(vocab_size: u32) -> Self {
        assert!(vocab_size > RESERVED, "vocabulary must exceed the reserved ids");
        WhitespaceTokenizer {
            vocab_size,
            seen: RwLock::new(HashMap::new()),
        }
    }

    pub fn word_id(&self, word: &str) -> u32 {
        RESERVED + fnv1a32(word.as_bytes()) % (self.vocab_size - RESERVED)
    }
}

impl Default for WhitespaceTokenizer {
    fn default() -> Self {
        WhitespaceTokenizer::new(1 << 31)
    }
}

fn fnv1a32(bytes: &[u8]) -> u32 {
    bytes.iter().fold(0x811c_9dc5u32, |h, &b| (h ^ b as u32).wrapping_mul(0x0100_0193))
}

impl Tokenizer for WhitespaceTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizeError> {
        let ids: Vec<u32> = text.split_whitespace().map(|w| self.word_id(w)).collect();
        let fresh: Vec<(u32, &str)> = {
            let seen = self.seen.read().unwrap();
            text.split_whitespace()
                .zip(&ids)
                .filter(|(w, id)| !seen.get(id).is_some_and(|s| s.contains(*w)))
                .map(|(w, &id)| (id, w))
                .collect()
        };
        if !fresh.is_empty() {
            let mut seen = self.seen.write().unwrap();
            for (id, w) in fresh {
                seen.entry(id).or_default().insert(w.to_string());
            }
        }
        Ok(ids)
    }

    fn decode(&self, ids: &[u32]) -> Result<String, TokenizeError> {
        let seen = self.seen.read().unwrap();
        let mut words = Vec::with_capacity(ids.len());
        for &id in ids {
            let set = seen.get(&id).ok_or(TokenizeError::UnknownId(id))?;
            if set.len() > 1 {
                return Err(TokenizeError::AmbiguousId(id));
            }
            words.push(set.iter().next().unwrap().as_str());
        }
        Ok(words.join(" "))
    }

    fn eos_id(&self) -> u32 {
        2
    }

    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }
}

/// Whitespace-pretokenised lookup over a vocabulary file with one token per
/// line; the line number is the id. The file must contain `</s>`. Words not
/// in the vocabulary map to `<unk>` when present and fail otherwise.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    eos: u32,
    unk: Option<u32>,
}

impl VocabTokenizer {
    pub fn new(tokens: Vec<String>) -> Result<Self, String> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(format!("token {t:?} listed twice"));
            }
        }
        let eos = *ids.get("</s>").ok_or("vocabulary has no </s> token")?;
        let unk = ids.get("<unk>").copied();
        Ok(VocabTokenizer { tokens, ids, eos, unk })
    }

    pub fn from_file(path: &Path) -> Result<Self, PackError> {
        let text = std::fs::read_to_string(path).map_err(|source| PackError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let tokens = text.lines().map(str::to_string).collect();
        VocabTokenizer::new(tokens).map_err(|m| PackError::UnknownTokenizer(format!("{}: {m}", path.display())))
    }
}

impl Tokenizer for VocabTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizeError> {
        text.split_whitespace()
            .map(|w| {
                self.ids
                    .get(w)
                    .copied()
                    .or(self.unk)
                    .ok_or_else(|| TokenizeError::Other(format!("word {w:?} not in vocabulary")))
            })
            .collect()
    }

    fn decode(&self, ids: &[u32]) -> Result<String, TokenizeError> {
        let words: Result<Vec<&str>, _> = ids
            .iter()
            .map(|&id| self.tokens.get(id as usize).map(String::as_str).ok_or(TokenizeError::UnknownId(id)))
            .collect();
        Ok(words?.join(" "))
    }

    fn eos_id(&self) -> u32 {
        self.eos
    }

    fn vocab_size(&self) -> u32 {
        self.tokens.len() as u32
    }
}

/// Resolves a `--tokenizer` value: `whitespace`, `whitespace:<vocab size>`
/// or `external:<vocab file>`.
pub fn tokenizer_from_spec(spec: &str) -> Result<Box<dyn Tokenizer + Send>, PackError> {
    let bad = || PackError::UnknownTokenizer(spec.to_string());
    match spec.split_once(':') {
        None if spec == "whitespace" => Ok(Box::new(WhitespaceTokenizer::default())),
        Some(("whitespace", n)) => match n.parse::<u32>() {
            Ok(n) if n > RESERVED => Ok(Box::new(WhitespaceTokenizer::new(n))),
            _ => Err(bad()),
        },
        Some(("external", path)) if !path.is_empty() => Ok(Box::new(VocabTokenizer::from_file(Path::new(path))?)),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailPolicy {
    #[default]
    Drop,
    Pad,
}

impl std::str::FromStr for TailPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "drop" => Ok(TailPolicy::Drop),
            "pad" => Ok(TailPolicy::Pad),
            other => Err(format!("expected pad or drop, got {other:?}")),
        }
    }
}

/// A contiguous run of one document's segment (its tokens plus trailing EOS)
/// inside a block. `start` is the offset within that segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub doc_id: String,
    pub start: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub ids: Vec<u32>,
    pub source_spans: Vec<SourceSpan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackStats {
    pub sequences: usize,
    pub tokens_emitted: usize,
    pub tokens_dropped_tail: usize,
    pub tokens_padded: usize,
    pub docs_consumed: usize,
}

/// Streaming chunker; feed documents in order, collect finished blocks.
#[derive(Debug)]
pub struct Packer {
    context_length: usize,
    eos: u32,
    pad: u32,
    ids: Vec<u32>,
    spans: Vec<SourceSpan>,
    stats: PackStats,
}

impl Packer {
    pub fn new(context_length: usize, eos: u32, pad: u32) -> Result<Self, PackError> {
        if context_length < 2 {
            return Err(PackError::ContextTooShort(context_length));
        }
        Ok(Packer {
            context_length,
            eos,
            pad,
            ids: Vec::with_capacity(context_length),
            spans: Vec::new(),
            stats: PackStats::default(),
        })
    }

    /// Appends `tokens` followed by EOS, returning any blocks completed.
    pub fn push(&mut self, doc_id: &str, tokens: &[u32]) -> Vec<PackedSequence> {
        let mut done = Vec::new();
        let segment_len = tokens.len() + 1;
        let mut offset = 0;
        while offset < segment_len {
            let room = self.context_length - self.ids.len();
            let take = room.min(segment_len - offset);
            for k in offset..offset + take {
                self.ids.push(tokens.get(k).copied().unwrap_or(self.eos));
            }
            self.spans.push(SourceSpan {
                doc_id: doc_id.to_string(),
                start: offset,
                count: take,
            });
            offset += take;
            if self.ids.len() == self.context_length {
                done.push(self.emit());
            }
        }
        self.stats.docs_consumed += 1;
        done
    }

    fn emit(&mut self) -> PackedSequence {
        self.stats.sequences += 1;
        self.stats.tokens_emitted += self.context_length;
        PackedSequence {
            ids: std::mem::replace(&mut self.ids, Vec::with_capacity(self.context_length)),
            source_spans: std::mem::take(&mut self.spans),
        }
    }

    /// Handles the partial tail and returns the final statistics.
    pub fn finish(mut self, tail: TailPolicy) -> (Option<PackedSequence>, PackStats) {
        if self.ids.is_empty() {
            return (None, self.stats);
        }
        match tail {
            TailPolicy::Drop => {
                self.stats.tokens_dropped_tail = self.ids.len();
                (None, self.stats)
            }
            TailPolicy::Pad => {
                let missing = self.context_length - self.ids.len();
                self.ids.resize(self.context_length, self.pad);
                self.spans.push(SourceSpan {
                    doc_id: PAD_SPAN_ID.to_string(),
                    start: 0,
                    count: missing,
                });
                self.stats.tokens_padded = missing;
                let last = self.emit();
                (Some(last), self.stats)
            }
        }
    }
}

fn encode_batch<T: Tokenizer + ?Sized>(docs: &[Document], tok: &T) -> Result<Vec<Vec<u32>>, PackError> {
    docs.par_iter()
        .map(|d| {
            tok.encode(&d.text).map_err(|source| PackError::Tokenize {
                doc_id: d.id.clone(),
                source,
            })
        })
        .collect()
}

/// Packs with the default drop-tail policy.
pub fn pack<T: Tokenizer + ?Sized>(
    docs: &[Document],
    tok: &T,
    context_length: usize,
) -> Result<(Vec<PackedSequence>, PackStats), PackError> {
    pack_with_tail(docs, tok, context_length, TailPolicy::Drop)
}

pub fn pack_with_tail<T: Tokenizer + ?Sized>(
    docs: &[Document],
    tok: &T,
    context_length: usize,
    tail: TailPolicy,
) -> Result<(Vec<PackedSequence>, PackStats), PackError> {
    let mut packer = Packer::new(context_length, tok.eos_id(), tok.pad_id())?;
    let mut out = Vec::new();
    for chunk in docs.chunks(ENCODE_BATCH) {
        let encoded = encode_batch(chunk, tok)?;
        for (doc, tokens) in chunk.iter().zip(&encoded) {
            out.extend(packer.push(&doc.id, tokens));
        }
    }
    let (last, stats) = packer.finish(tail);
    out.extend(last);
    Ok((out, stats))
}

/// Outcome of [`unpack_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PackCheck {
    Consistent,
    /// `offset` counts tokens from the start of the first block.
    Mismatch { offset: usize, reason: String },
}

impl PackCheck {
    pub fn is_consistent(&self) -> bool {
        matches!(self, PackCheck::Consistent)
    }
}

/// Re-derives the reference stream from `docs` and verifies that the blocks
/// are its prefix and that every span points at the right document tokens.
pub fn unpack_check<T: Tokenizer + ?Sized>(seqs: &[PackedSequence], tok: &T, docs: &[Document]) -> PackCheck {
    let eos = tok.eos_id();
    let mut segments: HashMap<&str, Vec<u32>> = HashMap::with_capacity(docs.len());
    let mut stream = Vec::new();
    for d in docs {
        let mut seg = match tok.encode(&d.text) {
            Ok(s) => s,
            Err(e) => {
                return PackCheck::Mismatch {
                    offset: stream.len(),
                    reason: format!("cannot encode {}: {e}", d.id),
                }
            }
        };
        seg.push(eos);
        stream.extend_from_slice(&seg);
        segments.insert(&d.id, seg);
    }

    let mut offset = 0usize;
    let context_length = seqs.first().map_or(0, |s| s.ids.len());
    for seq in seqs {
        if seq.ids.len() != context_length {
            return PackCheck::Mismatch {
                offset,
                reason: format!("block of {} tokens, expected {context_length}", seq.ids.len()),
            };
        }
        for (k, &id) in seq.ids.iter().enumerate() {
            let pos = offset + k;
            match stream.get(pos) {
                Some(&want) if want != id => {
                    return PackCheck::Mismatch {
                        offset: pos,
                        reason: format!("token {id} where stream has {want}"),
                    }
                }
                None if id != tok.pad_id() => {
                    return PackCheck::Mismatch {
                        offset: pos,
                        reason: format!("token {id} past end of stream"),
                    }
                }
                _ => {}
            }
        }
        let mut cursor = 0usize;
        for span in &seq.source_spans {
            let block = &seq.ids[cursor..(cursor + span.count).min(seq.ids.len())];
            if span.doc_id != PAD_SPAN_ID {
                let ok = segments
                    .get(span.doc_id.as_str())
                    .and_then(|seg| seg.get(span.start..span.start + span.count))
                    .is_some_and(|want| want == block);
                if !ok {
                    return PackCheck::Mismatch {
                        offset: offset + cursor,
                        reason: format!("span for {:?} does not match its document", span.doc_id),
                    };
                }
            }
            cursor += span.count;
        }
        if cursor != seq.ids.len() {
            return PackCheck::Mismatch {
                offset: offset + cursor.min(seq.ids.len()),
                reason: format!("spans cover {cursor} of {} tokens", seq.ids.len()),
            };
        }
        offset += seq.ids.len();
    }
    PackCheck::Consistent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackManifest {
    pub context_length: usize,
    pub tokenizer: String,
    pub tail: TailPolicy,
    pub stats: PackStats,
    pub spans: Vec<Vec<SourceSpan>>,
}

/// Sidecar manifest path for a block file.
pub fn manifest_path(bin: &Path) -> PathBuf {
    let mut name = bin.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_block(out: &mut impl Write, ids: &[u32]) -> std::io::Result<()> {
    out.write_all(&(ids.len() as u32).to_le_bytes())?;
    for id in ids {
        out.write_all(&id.to_le_bytes())?;
    }
    Ok(())
}

/// Writes blocks in the length-prefixed format (no manifest).
pub fn write_blocks(path: &Path, seqs: &[PackedSequence]) -> Result<(), PackError> {
    let io_err = |source| PackError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for s in seqs {
        write_block(&mut out, &s.ids).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a length-prefixed block file.
pub fn read_blocks(path: &Path) -> Result<Vec<Vec<u32>>, PackError> {
    let io_err = |source| PackError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err)?)
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    let word = |i: usize| -> Option<u32> { bytes.get(i..i + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap())) };
    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let len = word(pos).ok_or_else(|| PackError::Truncated { path: path.into() })? as usize;
        pos += 4;
        let block: Option<Vec<u32>> = (0..len).map(|k| word(pos + 4 * k)).collect();
        blocks.push(block.ok_or_else(|| PackError::Truncated { path: path.into() })?);
        pos += 4 * len;
    }
    Ok(blocks)
}

/// Streams a JSONL corpus into a block file plus manifest.
pub fn pack_file<T: Tokenizer + ?Sized>(
    input: &Path,
    output: &Path,
    tok: &T,
    tokenizer_name: &str,
    context_length: usize,
    tail: TailPolicy,
) -> Result<PackStats, PackError> {
    let io_err = |source| PackError::Io {
        path: output.to_path_buf(),
        source,
    };
    let mut packer = Packer::new(context_length, tok.eos_id(), tok.pad_id())?;
    let mut out = BufWriter::new(File::create(output).map_err(io_err)?);
    let mut spans = Vec::new();
    let mut emit = |seqs: Vec<PackedSequence>, out: &mut BufWriter<File>| -> Result<(), PackError> {
        for s in seqs {
            write_block(out, &s.ids).map_err(io_err)?;
            spans.push(s.source_spans);
        }
        Ok(())
    };

    let mut reader = read_stream(input)?;
    loop {
        let batch: Vec<Document> = reader.by_ref().take(ENCODE_BATCH).collect::<Result<_, _>>()?;
        if batch.is_empty() {
            break;
        }
        let encoded = encode_batch(&batch, tok)?;
        for (doc, tokens) in batch.iter().zip(&encoded) {
            let seqs = packer.push(&doc.id, tokens);
            emit(seqs, &mut out)?;
        }
    }
    let (last, stats) = packer.finish(tail);
    emit(last.into_iter().collect(), &mut out)?;
    out.flush().map_err(io_err)?;

    let manifest = PackManifest {
        context_length,
        tokenizer: tokenizer_name.to_string(),
        tail,
        stats: stats.clone(),
        spans,
    };
    let mpath = manifest_path(output);
    let file = File::create(&mpath).map_err(|source| PackError::Io {
        path: mpath.clone(),
        source,
    })?;
    serde_json::to_writer(BufWriter::new(file), &manifest).map_err(|e| PackError::Io {
        path: mpath,
        source: e.into(),
    })?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maps a document's text to a fixed token list ("5 6 7" → [5, 6, 7]).
    struct Literal;

    impl Tokenizer for Literal {
        fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizeError> {
            text.split_whitespace()
                .map(|t| t.parse().map_err(|_| TokenizeError::Other(format!("not a number: {t}"))))
                .collect()
        }
        fn decode(&self, ids: &[u32]) -> Result<String, TokenizeError> {
            Ok(ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
        }
        fn eos_id(&self) -> u32 {
            2
        }
        fn vocab_size(&self) -> u32 {
            u32::MAX
        }
    }

    #[test]
    fn worked_example_drops_tail() {
        let docs = vec![Document::new("a", "5 6 7"), Document::new("b", "8 9")];
        let (seqs, stats) = pack(&docs, &Literal, 4).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].ids, vec![5, 6, 7, 2]);
        assert_eq!(
            seqs[0].source_spans,
            vec![SourceSpan { doc_id: "a".into(), start: 0, count: 4 }]
        );
        assert_eq!(stats.tokens_dropped_tail, 3);
        assert_eq!(stats.tokens_emitted, 4);
        assert_eq!(stats.docs_consumed, 2);
    }

    #[test]
    fn exact_fit_leaves_nothing() {
        let docs = vec![Document::new("a", "10 11 12")];
        let (seqs, stats) = pack(&docs, &Literal, 4).unwrap();
        assert_eq!(seqs[0].ids, vec![10, 11, 12, 2]);
        assert_eq!(stats.tokens_dropped_tail, 0);
    }

    #[test]
    fn padding_tail() {
        let docs = vec![Document::new("a", "5 6 7"), Document::new("b", "8 9")];
        let (seqs, stats) = pack_with_tail(&docs, &Literal, 4, TailPolicy::Pad).unwrap();
        assert_eq!(seqs[1].ids, vec![8, 9, 2, 2]);
        assert_eq!(seqs[1].source_spans.last().unwrap().doc_id, PAD_SPAN_ID);
        assert_eq!(stats.tokens_padded, 1);
        assert_eq!(stats.tokens_dropped_tail, 0);
        assert!(unpack_check(&seqs, &Literal, &docs).is_consistent());
    }

    #[test]
    fn straddling_spans() {
        let docs = vec![Document::new("a", "5 6 7 8 9"), Document::new("b", "10")];
        let (seqs, _) = pack(&docs, &Literal, 4).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[1].ids, vec![9, 2, 10, 2]);
        assert_eq!(
            seqs[1].source_spans,
            vec![
                SourceSpan { doc_id: "a".into(), start: 4, count: 2 },
                SourceSpan { doc_id: "b".into(), start: 0, count: 2 },
            ]
        );
    }

    #[test]
    fn short_context_rejected() {
        assert!(matches!(pack(&[], &Literal, 1), Err(PackError::ContextTooShort(1))));
    }

    #[test]
    fn tokenizer_error_names_document() {
        let docs = vec![Document::new("ok", "1"), Document::new("bad", "x")];
        match pack(&docs, &Literal, 4) {
            Err(PackError::Tokenize { doc_id, .. }) => assert_eq!(doc_id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mutation_is_detected_at_its_offset() {
        let docs: Vec<_> = (0..20)
            .map(|i| Document::new(format!("d{i}"), format!("{} {} {}", 10 + i, 11 + i, 12 + i)))
            .collect();
        let (mut seqs, _) = pack(&docs, &Literal, 8).unwrap();
        assert!(unpack_check(&seqs, &Literal, &docs).is_consistent());
        seqs[2].ids[5] += 1000;
        match unpack_check(&seqs, &Literal, &docs) {
            PackCheck::Mismatch { offset, .. } => assert_eq!(offset, 2 * 8 + 5),
            PackCheck::Consistent => panic!("mutation not detected"),
        }
        assert!(unpack_check(&[], &Literal, &[]).is_consistent());
    }

    #[test]
    fn whitespace_tokenizer_roundtrip_and_reserved_ids() {
        let tok = WhitespaceTokenizer::default();
        let ids = tok.encode("  saya   suka\tnasi lemak\n").unwrap();
        assert!(ids.iter().all(|&id| id >= 3 && id < tok.vocab_size()));
        assert_eq!(tok.decode(&ids).unwrap(), "saya suka nasi lemak");
        assert_eq!(tok.encode("saya").unwrap()[0], ids[0]);
    }

    #[test]
    fn colliding_words_do_not_decode() {
        let tok = WhitespaceTokenizer::new(4);
        let ids = tok.encode("a b").unwrap();
        assert_eq!(ids, vec![3, 3]);
        assert_eq!(tok.decode(&ids), Err(TokenizeError::AmbiguousId(3)));
    }

    #[test]
    fn block_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.bin");
        let seqs = vec![
            PackedSequence { ids: vec![1, 2, 3], source_spans: vec![] },
            PackedSequence { ids: vec![u32::MAX, 0, 7], source_spans: vec![] },
        ];
        write_blocks(&path, &seqs).unwrap();
        let blocks = read_blocks(&path).unwrap();
        assert_eq!(blocks, vec![vec![1, 2, 3], vec![u32::MAX, 0, 7]]);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], &[3, 0, 0, 0, 1, 0, 0, 0]);
    }
}
