use std::path::{Path, PathBuf};
use std::process::Command;

use corpuskit::cli::run;
use corpuskit::corpus_io::{write_stream, Document};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corpuskit"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn corpus(dir: &Path) -> PathBuf {
    let base = "sang kancil berjalan di tepi sungai mencari buah rambutan yang masak ranum di hutan";
    let mut docs = vec![
        Document::new("a", base),
        Document::new("b", base),
        Document::new("c", "404 Not Found"),
        Document::new("d", "ok"),
        Document::new("e", "ayat      panjang dengan ruang........ berlebihan"),
    ];
    for i in 0..40 {
        docs.push(Document::new(format!("x{i}"), format!("dokumen nombor {i} tentang perkara {} yang lain", i * 7)));
    }
    let path = dir.join("corpus.jsonl");
    write_stream(&docs, &path).unwrap();
    path
}

fn ok(cmd: &mut Command) {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes() {
    assert_eq!(run(["corpuskit", "--help"]), 0);
    assert_eq!(run(["corpuskit", "dedup", "--help"]), 0);
    assert_eq!(run(["corpuskit", "--version"]), 0);
    assert_eq!(run(["corpuskit", "clean", "--output", "x"]), 1);
    assert_eq!(run(["corpuskit", "frobnicate"]), 1);
    assert_eq!(run(["corpuskit", "dedup", "--input", "a", "--output", "b", "--threshold", "2"]), 1);
    assert_eq!(run(["corpuskit", "clean", "--input", "/nonexistent/in.jsonl", "--output", "/tmp/unused.jsonl"]), 2);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let out = bin().args(["pack", "--input", "a", "--output", "b", "--tokenizer", "bpe"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn pipeline_matches_manual_stages() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path());
    let work = dir.path().join("work");
    let config = dir.path().join("pipeline.toml");
    std::fs::write(
        &config,
        format!(
            "input = {:?}\nworkdir = {:?}\n\n[[stage]]\nkind = \"clean\"\n\n[[stage]]\nkind = \"dedup\"\nnum_perm = 128\n\n[[stage]]\nkind = \"pack\"\ncontext_length = 32\n",
            input, work
        ),
    )
    .unwrap();
    ok(bin().args(["--threads", "2", "pipeline", "--config"]).arg(&config));

    let m = dir.path().join("manual");
    std::fs::create_dir(&m).unwrap();
    ok(bin().arg("clean").arg("--input").arg(&input).arg("--output").arg(m.join("c.jsonl")));
    ok(bin()
        .args(["dedup", "--num-perm", "128", "--input"])
        .arg(m.join("c.jsonl"))
        .arg("--output")
        .arg(m.join("d.jsonl")));
    ok(bin()
        .args(["pack", "--context-length", "32", "--input"])
        .arg(m.join("d.jsonl"))
        .arg("--output")
        .arg(m.join("p.bin")));

    let read = |p: PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(work.join("01-clean.jsonl")), read(m.join("c.jsonl")));
    assert_eq!(read(work.join("02-dedup.jsonl")), read(m.join("d.jsonl")));
    assert_eq!(read(work.join("03-pack.bin")), read(m.join("p.bin")));

    let manifest: serde_json::Value = serde_json::from_slice(&read(work.join("manifest.json"))).unwrap();
    let stages = manifest["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 3);
    assert_eq!(stages[0]["output_records"], stages[1]["input_records"]);
}

#[test]
fn template_and_grammar_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let rendered = dir.path().join("r.jsonl");
    let chat = dir.path().join("chat.jsonl");
    let conv: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(data("chat_example.json")).unwrap()).unwrap();
    std::fs::write(&chat, format!("{conv}\n")).unwrap();
    ok(bin().args(["template", "render", "--input"]).arg(&chat).arg("--output").arg(&rendered));
    let line: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&rendered).unwrap().trim()).unwrap();
    let golden = std::fs::read_to_string(data("golden/chat_example.txt")).unwrap();
    assert_eq!(line["text"].as_str().unwrap(), golden.trim_end_matches('\n'));

    let items = dir.path().join("items.jsonl");
    ok(bin().args(["grammar-synth", "--per-sentence", "2", "--parses"]).arg(data("example_parse.conllu")).arg("--output").arg(&items));
    assert_eq!(std::fs::read_to_string(&items).unwrap().lines().count(), 2);
}

#[test]
fn eval_with_mock_client() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("eval.json");
    let out = bin()
        .args(["eval", "--shots", "0,1", "--samples", "2", "--model", "mock", "--questions"])
        .arg(data("tatabahasa_sample.jsonl"))
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mock &"));
    assert!(report.exists());
}
