//! Clean, dedup and pack driven by a TOML config in a temporary directory.

use corpuskit::corpus_io::{write_stream, Document};
use corpuskit::pipeline::{run_pipeline, PipelineConfig};

fn main() {
    let dir = std::env::temp_dir().join(format!("corpuskit-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let input = dir.join("corpus.jsonl");
    let mut docs: Vec<Document> = (0..200)
        .map(|i| Document::new(format!("d{i}"), format!("artikel {i} tentang ekonomi negeri dan pelaburan baharu tahun {}", 2000 + i % 20)))
        .collect();
    docs.push(Document::new("dup", docs[0].text.clone()));
    docs.push(Document::new("err", "404 Not Found"));
    write_stream(&docs, &input).unwrap();

    let text = format!(
        "input = {:?}\nworkdir = {:?}\n\n[[stage]]\nkind = \"clean\"\n\n[[stage]]\nkind = \"dedup\"\n\n[[stage]]\nkind = \"pack\"\ncontext_length = 256\n",
        input,
        dir.join("work")
    );
    let cfg = PipelineConfig::from_toml(&text).unwrap();
    let manifest = run_pipeline(&cfg).unwrap();
    for s in &manifest.stages {
        println!("{} -> {}: {} -> {}", s.input.display(), s.output.display(), s.input_records, s.output_records);
    }
    println!("manifest: {}", cfg.manifest_path().display());
    std::fs::remove_dir_all(&dir).unwrap();
}
