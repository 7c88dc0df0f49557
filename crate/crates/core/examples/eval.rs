//! Few-shot evaluation against a scripted client.

use corpuskit::chat_template::Turn;
use corpuskit::eval::{accuracy_row, build_prompt, parse_questions, run_eval, select_exemplars, EvalConfig};
use corpuskit::synthgen::client::FnClient;
use corpuskit::synthgen::GenerationParams;

const QUESTIONS: &str = r#"{"id": "q1", "question": "Pilih ayat yang betul.", "choices": {"A": {"text": "Dia pergi ke sekolah.", "answer": true}, "B": {"text": "Dia pergi di sekolah.", "answer": false}}}
{"id": "q2", "question": "Kata sendi yang sesuai: ___ Ipoh.", "choices": {"A": {"text": "ke", "answer": false}, "B": {"text": "di", "answer": true}}}
{"id": "q3", "question": "Penjodoh bilangan untuk kereta?", "choices": {"A": {"text": "buah", "answer": true}, "B": {"text": "ekor", "answer": false}}}
"#;

fn main() {
    let qs = parse_questions(QUESTIONS, "inline").unwrap();
    println!("{}\n", build_prompt(&qs[2], &select_exemplars(&qs, 2, 1)).unwrap());

    let client = FnClient(|m: &[Turn], _: &GenerationParams| {
        let answer = if m[0].content.contains("kereta") { "A" } else { "B" };
        Ok(format!("Jawapan: {answer}"))
    });
    let mut results = Vec::new();
    for shots in [0, 1] {
        let cfg = EvalConfig { shots, samples_per_question: 3, ..EvalConfig::default() };
        let r = run_eval(&qs, &cfg, &client).unwrap();
        println!("{shots}-shot: {}/{} correct", r.correct, r.total);
        results.push(r);
    }
    println!("{}", accuracy_row("scripted", &results));
}
