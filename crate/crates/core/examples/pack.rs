//! Packing documents into fixed-length blocks and checking the result.

use corpuskit::corpus_io::Document;
use corpuskit::packing::{pack_with_tail, unpack_check, TailPolicy, WhitespaceTokenizer};

fn main() {
    let docs: Vec<Document> = [
        "saya suka makan nasi lemak",
        "dia pergi ke pasar pagi tadi",
        "cuaca hari ini panas terik",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| Document::new(format!("d{i}"), *t))
    .collect();
    let tok = WhitespaceTokenizer::default();
    for policy in [TailPolicy::Drop, TailPolicy::Pad] {
        let (seqs, stats) = pack_with_tail(&docs, &tok, 8, policy).unwrap();
        println!("{policy:?}: {stats:?}");
        for s in &seqs {
            let spans: Vec<String> = s.source_spans.iter().map(|sp| format!("{}+{}", sp.doc_id, sp.count)).collect();
            println!("  {:?} <- {}", s.ids, spans.join(" "));
        }
        if policy == TailPolicy::Drop {
            println!("  check: {:?}", unpack_check(&seqs, &tok, &docs));
        }
    }
}
