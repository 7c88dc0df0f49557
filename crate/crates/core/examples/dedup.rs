//! Near-duplicate removal on a tiny in-memory corpus.

use corpuskit::corpus_io::Document;
use corpuskit::dedup::{dedup_corpus, estimate_jaccard, minhash, plan_bands, shingle, DedupConfig};

fn main() {
    let base = "kerajaan negeri mengumumkan cuti umum tambahan sempena sambutan hari raya tahun ini \
                dan semua jabatan kerajaan serta sekolah akan ditutup selama dua hari bermula isnin depan \
                manakala sektor swasta digalakkan memberi cuti kepada pekerja mengikut budi bicara majikan";
    let docs = vec![
        Document::new("berita-1", base),
        Document::new("berita-2", format!("{base}.")),
        Document::new("berita-3", "pasukan bola sepak negeri layak ke separuh akhir piala malaysia"),
    ];
    let cfg = DedupConfig { threshold: 0.8, ..DedupConfig::default() };
    let plan = plan_bands(&cfg);
    println!("bands={} rows={}", plan.bands, plan.rows);

    let sig = |t: &str| minhash(shingle(t, cfg.shingle_n), &cfg);
    let j = estimate_jaccard(&sig(&docs[0].text), &sig(&docs[1].text)).unwrap();
    println!("estimated jaccard(berita-1, berita-2) = {j:.3}");

    let out = dedup_corpus(&docs, &cfg).unwrap();
    for cluster in out.duplicate_clusters() {
        println!("cluster: {cluster:?}");
    }
    println!("kept: {:?}", out.kept);
}
