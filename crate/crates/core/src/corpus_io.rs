//! Line-delimited JSON corpus records.
//!
//! Each line holds one object with a required `"text"` string, an optional
//! `"id"` string and an optional flat `"meta"` object of string values.
//! Interior newlines are escaped by the JSON encoding, so one record is always
//! one line. Records without an id get `<file name>:<line number>`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{source_name}:{line}: malformed record: {reason}")]
    Malformed {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("{source_name}:{line}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 {
        source_name: String,
        line: usize,
        /// Offset from the start of the file.
        offset: u64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// The on-disk shape, before id synthesis.
#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: String,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

/// Lazy, single-consumer reader over a JSONL corpus.
pub struct DocumentReader<R> {
    reader: R,
    source_name: String,
    line: usize,
    offset: u64,
    buf: Vec<u8>,
    done: bool,
}

/// Opens `path` for streaming.
pub fn read_stream(path: impl AsRef<Path>) -> Result<DocumentReader<BufReader<File>>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(DocumentReader::new(BufReader::new(file), name))
}

/// Reads a whole corpus into memory.
pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    read_stream(path)?.collect()
}

impl<R: BufRead> DocumentReader<R> {
    pub fn new(reader: R, source_name: impl Into<String>) -> Self {
        DocumentReader {
            reader,
            source_name: source_name.into(),
            line: 0,
            offset: 0,
            buf: Vec::new(),
            done: false,
        }
    }

    /// Capacity of the internal line buffer; bounded by the longest line seen.
    pub fn buffer_capacity(&self) -> usize {
        self.buf.capacity()
    }

    fn malformed(&self, reason: impl Into<String>) -> CorpusError {
        CorpusError::Malformed {
            source_name: self.source_name.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_record(&mut self) -> Option<Result<Document, CorpusError>> {
        loop {
            self.buf.clear();
            let line_start = self.offset;
            let n = match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(n) => n,
                Err(source) => {
                    return Some(Err(CorpusError::Io {
                        path: PathBuf::from(&self.source_name),
                        source,
                    }))
                }
            };
            self.offset += n as u64;
            self.line += 1;

            let text = match std::str::from_utf8(&self.buf) {
                Ok(s) => s,
                Err(e) => {
                    return Some(Err(CorpusError::InvalidUtf8 {
                        source_name: self.source_name.clone(),
                        line: self.line,
                        offset: line_start + e.valid_up_to() as u64,
                    }))
                }
            };
            let trimmed = text.trim();
            if trimmed.is_empty() {
                continue;
            }
            let raw: RawRecord = match serde_json::from_str(trimmed) {
                Ok(r) => r,
                Err(e) => return Some(Err(self.malformed(e.to_string()))),
            };
            let id = match raw.id {
                Some(id) if id.is_empty() => return Some(Err(self.malformed("empty \"id\""))),
                Some(id) => id,
                None => format!("{}:{}", self.source_name, self.line),
            };
            return Some(Ok(Document {
                id,
                text: raw.text,
                meta: raw.meta,
            }));
        }
    }
}

impl<R: BufRead> Iterator for DocumentReader<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record();
        if matches!(item, None | Some(Err(_))) {
            self.done = true;
        }
        item
    }
}

/// Summary of a written dataset. Lengths are in Unicode scalar values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub record_count: usize,
    /// UTF-8 bytes of text payloads.
    pub total_bytes: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub mean_len: f64,
}

/// Running accumulator for [`DatasetStats`].
#[derive(Debug, Default, Clone)]
pub struct StatsAccumulator {
    count: usize,
    bytes: u64,
    chars: u128,
    min: Option<usize>,
    max: usize,
}

impl StatsAccumulator {
    pub fn observe(&mut self, text: &str) {
        let len = text.chars().count();
        self.count += 1;
        self.bytes += text.len() as u64;
        self.chars += len as u128;
        self.min = Some(self.min.map_or(len, |m| m.min(len)));
        self.max = self.max.max(len);
    }

    pub fn finish(&self) -> DatasetStats {
        DatasetStats {
            record_count: self.count,
            total_bytes: self.bytes,
            min_len: self.min.unwrap_or(0),
            max_len: self.max,
            mean_len: if self.count == 0 {
                0.0
            } else {
                self.chars as f64 / self.count as f64
            },
        }
    }
}

/// Exclusive JSONL writer for one output path.
pub struct DocumentWriter {
    path: PathBuf,
    out: BufWriter<File>,
    stats: StatsAccumulator,
}

impl DocumentWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(DocumentWriter {
            path,
            out: BufWriter::new(file),
            stats: StatsAccumulator::default(),
        })
    }

    pub fn write(&mut self, doc: &Document) -> Result<(), CorpusError> {
        let res = serde_json::to_writer(&mut self.out, doc)
            .map_err(io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        res.map_err(|source| CorpusError::Io {
            path: self.path.clone(),
            source,
        })?;
        self.stats.observe(&doc.text);
        Ok(())
    }

    pub fn finish(mut self) -> Result<DatasetStats, CorpusError> {
        self.out.flush().map_err(|source| CorpusError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.stats.finish())
    }
}

/// Writes one line per document and returns statistics over what was written.
pub fn write_stream<I, D>(docs: I, path: impl AsRef<Path>) -> Result<DatasetStats, CorpusError>
where
    I: IntoIterator<Item = D>,
    D: std::borrow::Borrow<Document>,
{
    let mut writer = DocumentWriter::create(path)?;
    for doc in docs {
        writer.write(doc.borrow())?;
    }
    writer.finish()
}

/// Returns the first id that occurs more than once, if any.
pub fn find_duplicate_id(docs: &[Document]) -> Option<&str> {
    let mut seen = std::collections::HashSet::with_capacity(docs.len());
    docs.iter()
        .map(|d| d.id.as_str())
        .find(|id| !seen.insert(*id))
}
