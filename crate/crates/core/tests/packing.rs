use corpuskit::corpus_io::{write_stream, Document};
use corpuskit::packing::{
    manifest_path, pack, pack_file, pack_with_tail, read_blocks, tokenizer_from_spec, unpack_check, PackCheck, PackError,
    PackManifest, TailPolicy, Tokenizer, VocabTokenizer, WhitespaceTokenizer, PAD_SPAN_ID,
};
use proptest::prelude::*;

fn corpus() -> impl Strategy<Value = Vec<Document>> {
    proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..30), 0..25).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, w)| Document::new(format!("d{i}"), w.join(" ")))
            .collect()
    })
}

proptest! {
    #[test]
    fn conservation_and_tiling(docs in corpus(), l in 2usize..64) {
        let tok = WhitespaceTokenizer::new(1000);
        let (seqs, stats) = pack(&docs, &tok, l).unwrap();
        let stream: usize = docs.iter().map(|d| d.text.split_whitespace().count() + 1).sum();
        prop_assert_eq!(stats.sequences * l + stats.tokens_dropped_tail, stream);
        prop_assert!(stats.tokens_dropped_tail < l);
        prop_assert_eq!(stats.tokens_emitted, stats.sequences * l);
        for s in &seqs {
            prop_assert_eq!(s.ids.len(), l);
            prop_assert_eq!(s.source_spans.iter().map(|sp| sp.count).sum::<usize>(), l);
        }
        prop_assert!(unpack_check(&seqs, &tok, &docs).is_consistent());
    }

    #[test]
    fn padded_tail_keeps_every_token(docs in corpus(), l in 2usize..64) {
        let tok = WhitespaceTokenizer::new(1000);
        let (seqs, stats) = pack_with_tail(&docs, &tok, l, TailPolicy::Pad).unwrap();
        let stream: usize = docs.iter().map(|d| d.text.split_whitespace().count() + 1).sum();
        prop_assert_eq!(stats.tokens_dropped_tail, 0);
        prop_assert_eq!(seqs.len() * l, stream + stats.tokens_padded);
        prop_assert!(seqs.iter().all(|s| s.ids.len() == l));
    }
}

#[test]
fn worked_example() {
    struct Fixed;
    impl Tokenizer for Fixed {
        fn encode(&self, text: &str) -> Result<Vec<u32>, corpuskit::packing::TokenizeError> {
            Ok(text.split_whitespace().map(|w| w.parse().unwrap()).collect())
        }
        fn decode(&self, ids: &[u32]) -> Result<String, corpuskit::packing::TokenizeError> {
            Ok(ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
        }
        fn eos_id(&self) -> u32 {
            2
        }
        fn vocab_size(&self) -> u32 {
            100
        }
    }
    let docs = vec![Document::new("a", "5 6 7"), Document::new("b", "8 9")];
    let (seqs, stats) = pack(&docs, &Fixed, 4).unwrap();
    assert_eq!(seqs.len(), 1);
    assert_eq!(seqs[0].ids, [5, 6, 7, 2]);
    assert_eq!(stats.tokens_dropped_tail, 3);

    let (seqs, stats) = pack(&docs[..1], &Fixed, 4).unwrap();
    assert_eq!((seqs.len(), stats.tokens_dropped_tail), (1, 0));

    let (seqs, _) = pack_with_tail(&docs, &Fixed, 4, TailPolicy::Pad).unwrap();
    assert_eq!(seqs[1].ids, [8, 9, 2, 2]);
    assert_eq!(seqs[1].source_spans.last().unwrap().doc_id, PAD_SPAN_ID);

    assert!(matches!(pack(&docs, &Fixed, 1), Err(PackError::ContextTooShort(1))));
}

#[test]
fn mutation_is_located() {
    let tok = WhitespaceTokenizer::new(1000);
    let docs: Vec<Document> = (0..10).map(|i| Document::new(format!("d{i}"), "a b c d e")).collect();
    let (mut seqs, _) = pack(&docs, &tok, 8).unwrap();
    seqs[2].ids[3] ^= 1;
    match unpack_check(&seqs, &tok, &docs) {
        PackCheck::Mismatch { offset, .. } => assert_eq!(offset, 2 * 8 + 3),
        PackCheck::Consistent => panic!("mutation not detected"),
    }
    assert!(unpack_check(&[], &tok, &[]).is_consistent());
}

#[test]
fn block_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.jsonl");
    let output = dir.path().join("p.bin");
    let docs: Vec<Document> = (0..50).map(|i| Document::new(format!("d{i}"), format!("kata {i} lagi dan lagi"))).collect();
    write_stream(&docs, &input).unwrap();
    let tok = WhitespaceTokenizer::default();
    let stats = pack_file(&input, &output, &tok, "whitespace", 16, TailPolicy::Drop).unwrap();
    let (seqs, expected) = pack(&docs, &tok, 16).unwrap();
    assert_eq!(stats, expected);
    let blocks = read_blocks(&output).unwrap();
    assert_eq!(blocks, seqs.iter().map(|s| s.ids.clone()).collect::<Vec<_>>());
    let manifest: PackManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(&output)).unwrap()).unwrap();
    assert_eq!(manifest.spans.len(), blocks.len());
    assert_eq!(manifest.tokenizer, "whitespace");
}

#[test]
fn truncated_block_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    std::fs::write(&path, [3u8, 0, 0, 0, 1, 0, 0, 0]).unwrap();
    assert!(matches!(read_blocks(&path), Err(PackError::Truncated { .. })));
}

#[test]
fn whitespace_tokenizer_decodes_normalised_text() {
    let tok = WhitespaceTokenizer::default();
    let ids = tok.encode("  saya   suka\nnasi lemak ").unwrap();
    assert_eq!(tok.decode(&ids).unwrap(), "saya suka nasi lemak");
    assert!(tok.eos_id() < tok.vocab_size());
}

#[test]
fn vocab_tokenizer_and_specs() {
    let tok = VocabTokenizer::new(["<unk>", "<s>", "</s>", "saya", "makan"].map(String::from).to_vec()).unwrap();
    assert_eq!(tok.encode("saya makan nasi").unwrap(), [3, 4, 0]);
    assert_eq!(tok.eos_id(), 2);
    assert!(VocabTokenizer::new(vec!["a".into()]).is_err());

    assert!(tokenizer_from_spec("whitespace").is_ok());
    assert_eq!(tokenizer_from_spec("whitespace:500").unwrap().vocab_size(), 500);
    assert!(matches!(tokenizer_from_spec("bpe"), Err(PackError::UnknownTokenizer(_))));
    assert!(matches!(tokenizer_from_spec("external:/nonexistent/vocab"), Err(PackError::Io { .. })));
}
