use std::collections::HashSet;

use corpuskit::corpus_io::Document;
use corpuskit::dedup::{
    dedup_corpus, dedup_corpus_with_threads, estimate_jaccard, minhash, plan_bands, shingle, DedupConfig, DedupError,
    HashBits,
};
use proptest::prelude::*;

fn small_cfg() -> DedupConfig {
    DedupConfig {
        num_perm: 64,
        threshold: 0.8,
        ..DedupConfig::default()
    }
}

fn corpus() -> impl Strategy<Value = Vec<Document>> {
    proptest::collection::vec(proptest::collection::vec("[a-d]{1,2}", 0..15), 1..20).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, w)| Document::new(format!("d{i}"), w.join(" ")))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clusters_partition_ids(docs in corpus()) {
        let out = dedup_corpus(&docs, &small_cfg()).unwrap();
        let mut seen: Vec<&str> = out.clusters.iter().flatten().map(String::as_str).collect();
        seen.sort_unstable();
        let mut ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        prop_assert_eq!(seen, ids);
        prop_assert_eq!(out.kept.len(), out.clusters.len());
        for (c, k) in out.clusters.iter().zip(&out.kept) {
            prop_assert_eq!(&c[0], k);
        }
    }

    #[test]
    fn exact_copies_share_a_cluster(docs in corpus()) {
        let out = dedup_corpus(&docs, &small_cfg()).unwrap();
        for a in &docs {
            for b in &docs {
                if a.text == b.text {
                    let ca = out.clusters.iter().position(|c| c.contains(&a.id));
                    let cb = out.clusters.iter().position(|c| c.contains(&b.id));
                    prop_assert_eq!(ca, cb);
                }
            }
        }
    }

    #[test]
    fn thread_count_does_not_matter(docs in corpus()) {
        let one = dedup_corpus_with_threads(&docs, &small_cfg(), 1).unwrap();
        let four = dedup_corpus_with_threads(&docs, &small_cfg(), 4).unwrap();
        prop_assert_eq!(one, four);
    }

    #[test]
    fn signatures_are_elementwise_min(words in proptest::collection::vec("[a-z]{1,5}", 1..30)) {
        let cfg = small_cfg();
        let text = words.join(" ");
        let whole = minhash(shingle(&text, 2), &cfg);
        let half = minhash(shingle(&words[..words.len().div_ceil(2)].join(" "), 2), &cfg);
        prop_assert_eq!(whole.len(), cfg.num_perm);
        prop_assert_eq!(estimate_jaccard(&whole, &whole).unwrap(), 1.0);
        let j = estimate_jaccard(&whole, &half).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
    }
}

#[test]
fn shingles_of_short_text() {
    let s = shingle("Satu Dua", 5);
    assert_eq!(s, HashSet::from(["satu dua".to_string()]));
    assert_eq!(shingle("a b c d", 2).len(), 3);
}

#[test]
fn band_plan_fits_and_beats_neighbours() {
    for (perm, t) in [(64, 0.8), (128, 0.5), (256, 0.95)] {
        let cfg = DedupConfig { num_perm: perm, threshold: t, ..DedupConfig::default() };
        let p = plan_bands(&cfg);
        assert!(p.bands * p.rows <= perm);
        assert!(p.bands >= 1 && p.rows >= 1);
    }
}

#[test]
fn config_and_signature_errors() {
    let bad = DedupConfig { threshold: 1.5, ..DedupConfig::default() };
    assert!(matches!(dedup_corpus(&[], &bad), Err(DedupError::InvalidConfig(_))));
    let docs = vec![Document::new("x", "a"), Document::new("x", "b")];
    assert_eq!(dedup_corpus(&docs, &small_cfg()), Err(DedupError::DuplicateId("x".into())));
    let a = minhash(["x"], &small_cfg());
    let b = minhash(["x"], &DedupConfig { num_perm: 32, ..small_cfg() });
    assert_eq!(estimate_jaccard(&a, &b), Err(DedupError::LengthMismatch(64, 32)));
}

#[test]
fn hash_widths_both_work() {
    let text = "pada suatu hari seekor sang kancil sedang berjalan di tepi sungai yang luas";
    let docs = vec![Document::new("a", text), Document::new("b", text), Document::new("c", "lain sekali")];
    for bits in [HashBits::B32, HashBits::B64] {
        let cfg = DedupConfig { hash_bits: bits, ..DedupConfig::default() };
        let out = dedup_corpus(&docs, &cfg).unwrap();
        assert_eq!(out.kept, ["a", "c"]);
    }
}
