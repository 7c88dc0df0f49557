use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use corpuskit::chat_template::{render, Role, Turn};
use corpuskit::corpus_io::{write_stream, Document};
use corpuskit::synthgen::client::{complete_with_retry, ClientError, FnClient, MockClient, RetryPolicy};
use corpuskit::synthgen::job::{run_generation_job, JobRecipe, JobSpec};
use corpuskit::synthgen::{
    build_prompt, evolve, parse_structured_qa, ultrachat, EvolveMode, GenerationParams, QaRecord, QaSchema, Recipe,
    SynthError, TranslationHook, UltrachatOptions, WordlistHook,
};
use proptest::prelude::*;
use serde_json::Value;

proptest! {
    #[test]
    fn ultrachat_length_and_roles(turns in 0usize..5, seed in any::<u64>()) {
        let opts = UltrachatOptions { turns, params: GenerationParams::default().with_seed(seed), translate_all: false };
        let out = ultrachat("Perenggan.", "Soalan?", &MockClient::new(), &opts, &WordlistHook::new());
        prop_assert!(out.is_complete());
        let t = &out.conversation.turns;
        prop_assert_eq!(t.len(), 3 + 2 * turns);
        prop_assert_eq!(t[0].role, Role::Context);
        for (k, turn) in t[1..].iter().enumerate() {
            let want = if k % 2 == 0 { Role::User } else { Role::Assistant };
            prop_assert_eq!(turn.role, want);
        }
        prop_assert!(render(&out.conversation).is_ok());
    }

    #[test]
    fn templates_substitute_exactly(topic in "[a-z{} ]{0,20}") {
        let inputs = BTreeMap::from([("topic".to_string(), topic.clone())]);
        let t = build_prompt(Recipe::MalaysianQa, &inputs).unwrap();
        prop_assert_eq!(
            &t[0].content,
            &format!("generate random very specific {topic} questions dalam bahasa melayu related to malaysian context")
        );
    }
}

#[test]
fn ultrachat_failure_keeps_prefix() {
    let n = AtomicUsize::new(0);
    let client = FnClient(|_: &[Turn], _: &GenerationParams| {
        if n.fetch_add(1, Ordering::SeqCst) < 2 {
            Ok("ok".to_string())
        } else {
            Err(ClientError::Fatal("down".into()))
        }
    });
    let opts = UltrachatOptions { turns: 3, ..Default::default() };
    let out = ultrachat("p", "q", &client, &opts, &WordlistHook::new());
    assert_eq!(out.error, Some(ClientError::Fatal("down".into())));
    assert_eq!(out.conversation.turns.len(), 4);
}

#[test]
fn indonesian_turns_are_flagged_and_translated() {
    let hook = WordlistHook::new().with_translator(|s| s.replace("bisa", "boleh").replace("karena", "kerana"));
    let text = "Kamu bisa mencoba karena kode ini.";
    assert!(hook.detect_indonesian(text));
    assert!(!hook.detect_indonesian("Boleh saya tahu perbezaan kod ini?"));
    let client = MockClient::new();
    let question = "Apa perbedaan kode ini, bisakah dijelaskan karena saya bingung?";
    let out = ultrachat("p", question, &client, &UltrachatOptions::default(), &hook);
    let first = &out.conversation.turns[1];
    assert_eq!(first.indon, Some(true));
    assert_eq!(first.content_ms.as_deref(), Some("Apa perbedaan kode ini, bolehkah dijelaskan kerana saya bingung?"));
}

#[test]
fn retry_policy() {
    let n = AtomicUsize::new(0);
    let flaky = FnClient(|_: &[Turn], _: &GenerationParams| {
        if n.fetch_add(1, Ordering::SeqCst) < 2 {
            Err(ClientError::Transient("slow".into()))
        } else {
            Ok("done".to_string())
        }
    });
    let policy = RetryPolicy { retries: 3, backoff_base: Duration::ZERO };
    let (res, attempts) = complete_with_retry(&flaky, &[], &GenerationParams::default(), policy);
    assert_eq!((res.unwrap().as_str(), attempts), ("done", 3));
    let (res, attempts) = complete_with_retry(&flaky, &[], &GenerationParams::default(), RetryPolicy::none());
    assert_eq!((res.unwrap().as_str(), attempts), ("done", 1));
}

#[test]
fn evolve_prompts() {
    let t = evolve("Tulis puisi.", EvolveMode::Breadth, None).unwrap();
    assert!(t[0].content.ends_with("#Given Prompt#:\nTulis puisi.\n#Created Prompt#:\n"));
    assert!(matches!(evolve("x", EvolveMode::Depth, None), Err(SynthError::MissingMethod)));
    let t = evolve("x", EvolveMode::Depth, Some("Add one more constraint.")).unwrap();
    assert!(t[0].content.contains("Add one more constraint."));
}

#[test]
fn structured_reply_in_python_literal() {
    let raw = "Baik. {'qa': [{'question': 'Ibu negara?', 'A': 'KL', 'B': 'JB', 'C': 'Ipoh', 'D': 'Melaka', 'answer': 'A'}]}";
    let out = parse_structured_qa(raw, QaSchema::QaChoice).unwrap();
    match &out.items[..] {
        [QaRecord::Choice(item)] => {
            assert_eq!(item.answer, 'A');
            assert_eq!(item.options[&'D'], "Melaka");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(parse_structured_qa("tiada objek", QaSchema::OpenQa), Err(SynthError::Parse { .. })));
}

#[test]
fn job_resumes_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let output = dir.path().join("out.jsonl");
    let docs: Vec<Document> = (0..12).map(|i| Document::new(format!("r{i}"), format!("perenggan {i}"))).collect();
    write_stream(&docs, &input).unwrap();
    let spec = JobSpec {
        recipe: JobRecipe::Ultrachat { turns: 2, translate_all: false },
        input,
        output: output.clone(),
        concurrency: 3,
        retry: RetryPolicy::none(),
        params: GenerationParams::default().with_seed(7),
    };

    let n = AtomicUsize::new(0);
    let crashing = FnClient(|m: &[Turn], p: &GenerationParams| {
        if n.fetch_add(1, Ordering::SeqCst) >= 20 {
            Err(ClientError::Fatal("crash".into()))
        } else {
            Ok(MockClient::fallback_reply(m, p))
        }
    });
    let first = run_generation_job(&spec, &crashing, &WordlistHook::new()).unwrap();
    assert!(first.aborted);

    let second = run_generation_job(&spec, &MockClient::new(), &WordlistHook::new()).unwrap();
    assert!(!second.aborted);
    assert_eq!(second.skipped_existing, first.successes);

    let text = std::fs::read_to_string(&output).unwrap();
    let ids: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), ids.len());
    assert_eq!(ids.len(), 12);

    let fresh = tempfile::tempdir().unwrap();
    let spec2 = JobSpec { output: fresh.path().join("out.jsonl"), ..spec.clone() };
    run_generation_job(&spec2, &MockClient::new(), &WordlistHook::new()).unwrap();
    let mut a: Vec<&str> = text.lines().collect();
    let fresh_text = std::fs::read_to_string(&spec2.output).unwrap();
    let mut b: Vec<&str> = fresh_text.lines().collect();
    a.sort_unstable();
    b.sort_unstable();
    assert_eq!(a, b);
}
