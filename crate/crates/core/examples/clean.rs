//! Post-processing filters and normalisers.

use corpuskit::corpus_io::Document;
use corpuskit::postprocess::{clean_corpus, CleanConfig};

fn main() {
    let docs = vec![
        Document::new("1", "403 Forbidden: you don't have permission"),
        Document::new("2", "ya"),
        Document::new("3", "Resipi   nasi          lemak.............. sedap"),
        Document::new("4", "Harga minyak turun lagi minggu ini."),
    ];
    let (kept, report) = clean_corpus(docs, &CleanConfig::default());
    for d in &kept {
        println!("{}: {:?}", d.id, d.text);
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
