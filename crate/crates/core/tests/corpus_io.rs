use std::io::Write;

use corpuskit::corpus_io::{find_duplicate_id, read_all, write_stream, CorpusError, Document, DocumentReader};
use proptest::prelude::*;

fn doc_strategy() -> impl Strategy<Value = Document> {
    ("[a-z0-9]{1,8}", "\\PC{0,40}", proptest::collection::btree_map("[a-z]{1,4}", "\\PC{0,8}", 0..3))
        .prop_map(|(id, text, meta)| Document { id, text, meta })
}

proptest! {
    #[test]
    fn write_then_read_roundtrips(docs in proptest::collection::vec(doc_strategy(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let stats = write_stream(&docs, &path).unwrap();
        prop_assert_eq!(stats.record_count, docs.len());
        prop_assert_eq!(stats.total_bytes, docs.iter().map(|d| d.text.len() as u64).sum::<u64>());
        prop_assert_eq!(read_all(&path).unwrap(), docs);
    }
}

#[test]
fn missing_ids_use_file_and_line() {
    let input = "{\"text\": \"satu\"}\n\n{\"id\": \"x\", \"text\": \"dua\"}\n{\"text\": \"tiga\"}\n";
    let docs: Vec<Document> = DocumentReader::new(input.as_bytes(), "mem.jsonl")
        .collect::<Result<_, _>>()
        .unwrap();
    let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["mem.jsonl:1", "x", "mem.jsonl:4"]);
}

#[test]
fn malformed_line_is_named() {
    let input = "{\"text\": \"ok\"}\n{\"id\": 3}\n";
    let err = DocumentReader::new(input.as_bytes(), "bad.jsonl")
        .collect::<Result<Vec<_>, _>>()
        .unwrap_err();
    match err {
        CorpusError::Malformed { source_name, line, .. } => {
            assert_eq!(source_name, "bad.jsonl");
            assert_eq!(line, 2);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_utf8_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(b"{\"text\": \"ok\"}\n{\"text\": \"\xff\"}\n").unwrap();
    match read_all(&path).unwrap_err() {
        CorpusError::InvalidUtf8 { line, offset, .. } => {
            assert_eq!(line, 2);
            assert_eq!(offset, 15 + 10);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_ids_are_found() {
    let docs = vec![Document::new("a", "x"), Document::new("b", "y"), Document::new("a", "z")];
    assert_eq!(find_duplicate_id(&docs), Some("a"));
    assert_eq!(find_duplicate_id(&docs[..2]), None);
}
