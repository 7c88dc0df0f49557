//! MinHash + LSH near-duplicate removal.
//!
//! Documents are shingled into lowercased word n-grams. Each shingle is hashed
//! with SHA-1, truncated to the first `hash_bits / 8` bytes of the digest read
//! little-endian, and pushed through `num_perm` universal hash permutations
//! `(a * x + b) mod p`, where `p` is the largest prime below `2^hash_bits`.
//! The signature keeps the per-permutation minimum.
//!
//! Signatures are split into `b` bands of `r` rows (chosen by [`plan_bands`]).
//! Documents sharing any band become candidates; a candidate pair is merged
//! only if its estimated Jaccard similarity also clears the threshold. Merges
//! run through a union-find, so clusters are the connected components of the
//! verified pair relation. The earliest document of each cluster is kept.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::corpus_io::{find_duplicate_id, Document};

/// Largest prime below 2^64.
pub const PRIME_64: u64 = u64::MAX - 58;
/// Largest prime below 2^32.
pub const PRIME_32: u64 = (1u64 << 32) - 5;

const INTEGRATION_SAMPLES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum DedupError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error("signature lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum HashBits {
    B32,
    B64,
}

impl HashBits {
    pub fn prime(self) -> u64 {
        match self {
            HashBits::B32 => PRIME_32,
            HashBits::B64 => PRIME_64,
        }
    }

    /// Value carried by every position of an empty document's signature.
    pub fn sentinel(self) -> u64 {
        match self {
            HashBits::B32 => u32::MAX as u64,
            HashBits::B64 => u64::MAX,
        }
    }
}

impl TryFrom<u32> for HashBits {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, String> {
        match v {
            32 => Ok(HashBits::B32),
            64 => Ok(HashBits::B64),
            other => Err(format!("hash_bits must be 32 or 64, got {other}")),
        }
    }
}

impl From<HashBits> for u32 {
    fn from(b: HashBits) -> u32 {
        match b {
            HashBits::B32 => 32,
            HashBits::B64 => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub num_perm: usize,
    pub threshold: f64,
    pub hash_bits: HashBits,
    /// Word n-gram width.
    pub shingle_n: usize,
    pub seed: u64,
    pub false_positive_weight: f64,
    pub false_negative_weight: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            num_perm: 256,
            threshold: 0.95,
            hash_bits: HashBits::B64,
            shingle_n: 5,
            seed: 0,
            false_positive_weight: 0.5,
            false_negative_weight: 0.5,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        let bad = |m: &str| Err(DedupError::InvalidConfig(m.to_string()));
        if self.num_perm == 0 {
            return bad("num_perm must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie strictly between 0 and 1");
        }
        if self.shingle_n == 0 {
            return bad("shingle_n must be at least 1");
        }
        if !(self.false_positive_weight >= 0.0 && self.false_negative_weight >= 0.0) {
            return bad("band plan weights must be non-negative");
        }
        Ok(())
    }
}

/// Lowercased, whitespace-split word n-grams joined by single spaces.
///
/// Texts shorter than `n` words yield a single shingle of all their words;
/// empty texts yield the empty set.
pub fn shingle(text: &str, n: usize) -> HashSet<String> {
    assert!(n >= 1, "shingle width must be at least 1");
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    if words.is_empty() {
        return HashSet::new();
    }
    if words.len() < n {
        return HashSet::from([words.join(" ")]);
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

/// SHA-1 of `bytes`, truncated to `bits` by reading the leading digest bytes
/// little-endian.
pub fn base_hash(bytes: &[u8], bits: HashBits) -> u64 {
    let digest = Sha1::digest(bytes);
    match bits {
        HashBits::B32 => u32::from_le_bytes(digest[..4].try_into().unwrap()) as u64,
        HashBits::B64 => u64::from_le_bytes(digest[..8].try_into().unwrap()),
    }
}

/// `(a * x + b) mod p` without overflow, for `a, b, x < p`.
#[inline]
fn permute(a: u64, b: u64, x: u64, bits: HashBits) -> u64 {
    match bits {
        HashBits::B32 => (a * x + b) % PRIME_32,
        HashBits::B64 => reduce_p64((a as u128) * (x as u128) + b as u128),
    }
}

/// Reduction modulo `2^64 - 59` using `2^64 ≡ 59`.
#[inline]
fn reduce_p64(v: u128) -> u64 {
    let fold = |v: u128| (v >> 64) * 59 + (v as u64 as u128);
    let mut v = fold(fold(v));
    while v >= PRIME_64 as u128 {
        v -= PRIME_64 as u128;
    }
    v as u64
}

/// Seeded permutation parameters shared by every signature of a run.
#[derive(Debug, Clone)]
pub struct MinHasher {
    bits: HashBits,
    a: Vec<u64>,
    b: Vec<u64>,
}

impl MinHasher {
    pub fn new(cfg: &DedupConfig) -> Self {
        let p = cfg.hash_bits.prime();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (a, b) = (0..cfg.num_perm)
            .map(|_| (rng.gen_range(1..p), rng.gen_range(0..p)))
            .unzip();
        MinHasher {
            bits: cfg.hash_bits,
            a,
            b,
        }
    }

    pub fn num_perm(&self) -> usize {
        self.a.len()
    }

    pub fn signature<S: AsRef<str>>(&self, shingles: impl IntoIterator<Item = S>) -> MinHashSignature {
        let p = self.bits.prime();
        let mut values = vec![self.bits.sentinel(); self.a.len()];
        for s in shingles {
            let x = base_hash(s.as_ref().as_bytes(), self.bits) % p;
            for ((v, &a), &b) in values.iter_mut().zip(&self.a).zip(&self.b) {
                let h = permute(a, b, x, self.bits);
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature { values }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Signature of a shingle set under `cfg`. Builds the permutation table on
/// every call; use [`MinHasher`] when hashing many documents.
pub fn minhash<S: AsRef<str>>(shingles: impl IntoIterator<Item = S>, cfg: &DedupConfig) -> MinHashSignature {
    MinHasher::new(cfg).signature(shingles)
}

/// Fraction of positions on which two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.len() != b.len() {
        return Err(DedupError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let same = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub bands: usize,
    pub rows: usize,
    pub false_positive_weight: f64,
    pub false_negative_weight: f64,
}

fn candidate_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// Midpoint-rule integral of `f` over `[lo, hi]`.
fn integrate(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let step = (hi - lo) / INTEGRATION_SAMPLES as f64;
    (0..INTEGRATION_SAMPLES)
        .map(|i| f(lo + (i as f64 + 0.5) * step))
        .sum::<f64>()
        * step
}

/// Area under the candidate curve below the threshold.
pub fn false_positive_area(threshold: f64, bands: usize, rows: usize) -> f64 {
    integrate(0.0, threshold, |s| candidate_probability(s, bands, rows))
}

/// Area above the candidate curve beyond the threshold.
pub fn false_negative_area(threshold: f64, bands: usize, rows: usize) -> f64 {
    integrate(threshold, 1.0, |s| 1.0 - candidate_probability(s, bands, rows))
}

/// Picks `(bands, rows)` with `bands * rows <= num_perm` minimising the
/// weighted false-positive plus false-negative area. Ties keep the smallest
/// band count, then the smallest row count.
pub fn plan_bands(cfg: &DedupConfig) -> BandPlan {
    let (wfp, wfn) = (cfg.false_positive_weight, cfg.false_negative_weight);
    let mut best = (f64::INFINITY, 1, 1);
    for bands in 1..=cfg.num_perm {
        for rows in 1..=cfg.num_perm / bands {
            let err = wfp * false_positive_area(cfg.threshold, bands, rows)
                + wfn * false_negative_area(cfg.threshold, bands, rows);
            if err < best.0 {
                best = (err, bands, rows);
            }
        }
    }
    BandPlan {
        bands: best.1,
        rows: best.2,
        false_positive_weight: wfp,
        false_negative_weight: wfn,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateClusters {
    /// Connected components in order of their first member; members in input
    /// order. Singletons included.
    pub clusters: Vec<Vec<String>>,
    /// One id per cluster, in input order.
    pub kept: Vec<String>,
}

impl DuplicateClusters {
    pub fn kept_set(&self) -> HashSet<&str> {
        self.kept.iter().map(String::as_str).collect()
    }

    pub fn duplicate_clusters(&self) -> impl Iterator<Item = &Vec<String>> {
        self.clusters.iter().filter(|c| c.len() > 1)
    }

    pub fn dropped_count(&self) -> usize {
        self.clusters.iter().map(|c| c.len() - 1).sum()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Groups documents into buckets per band. Buckets with a single member are
/// discarded; the rest are sorted by first member.
fn band_buckets(signatures: &[MinHashSignature], plan: &BandPlan) -> Vec<Vec<Vec<usize>>> {
    (0..plan.bands)
        .into_par_iter()
        .map(|band| {
            let range = band * plan.rows..(band + 1) * plan.rows;
            let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
            for (i, sig) in signatures.iter().enumerate() {
                buckets.entry(&sig.values[range.clone()]).or_default().push(i);
            }
            let mut out: Vec<Vec<usize>> = buckets.into_values().filter(|b| b.len() > 1).collect();
            out.sort_unstable_by_key(|b| b[0]);
            out
        })
        .collect()
}

/// Clusters near-duplicate documents. Output depends only on `cfg` and input
/// order, not on the rayon thread count.
pub fn dedup_corpus(docs: &[Document], cfg: &DedupConfig) -> Result<DuplicateClusters, DedupError> {
    cfg.validate()?;
    if let Some(id) = find_duplicate_id(docs) {
        return Err(DedupError::DuplicateId(id.to_string()));
    }
    let hasher = MinHasher::new(cfg);
    let signatures: Vec<MinHashSignature> = docs
        .par_iter()
        .map(|d| hasher.signature(shingle(&d.text, cfg.shingle_n)))
        .collect();
    let plan = plan_bands(cfg);

    let mut uf = UnionFind::new(docs.len());
    for band in band_buckets(&signatures, &plan) {
        for bucket in band {
            for (k, &i) in bucket.iter().enumerate() {
                for &j in &bucket[k + 1..] {
                    if uf.find(i) == uf.find(j) {
                        continue;
                    }
                    if estimate_jaccard(&signatures[i], &signatures[j])? >= cfg.threshold {
                        uf.union(i, j);
                    }
                }
            }
        }
    }

    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<String>> = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        let root = uf.find(i);
        let slot = *by_root.entry(root).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(doc.id.clone());
    }
    let kept = clusters.iter().map(|c| c[0].clone()).collect();
    Ok(DuplicateClusters { clusters, kept })
}

/// Runs [`dedup_corpus`] on a dedicated pool of `threads` workers.
pub fn dedup_corpus_with_threads(
    docs: &[Document],
    cfg: &DedupConfig,
    threads: usize,
) -> Result<DuplicateClusters, DedupError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DedupError::ThreadPool(e.to_string()))?
        .install(|| dedup_corpus(docs, cfg))
}

/// Cluster report written next to the deduplicated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub config: DedupConfig,
    pub bands: usize,
    pub rows: usize,
    pub input_documents: usize,
    pub kept_documents: usize,
    pub duplicate_clusters: Vec<ClusterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub kept: String,
    pub members: Vec<String>,
}

impl ClusterReport {
    pub fn new(cfg: &DedupConfig, clusters: &DuplicateClusters) -> Self {
        let plan = plan_bands(cfg);
        ClusterReport {
            config: cfg.clone(),
            bands: plan.bands,
            rows: plan.rows,
            input_documents: clusters.clusters.iter().map(Vec::len).sum(),
            kept_documents: clusters.kept.len(),
            duplicate_clusters: clusters
                .duplicate_clusters()
                .map(|c| ClusterEntry {
                    kept: c[0].clone(),
                    members: c.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> HashSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn shingle_windows() {
        assert_eq!(shingle("a b c d", 2), set(&["a b", "b c", "c d"]));
        assert_eq!(shingle("Hello", 3), set(&["hello"]));
        assert!(shingle("", 5).is_empty());
        assert!(shingle(" \t\n", 1).is_empty());
        assert_eq!(shingle("A  B\tc", 2), set(&["a b", "b c"]));
    }

    #[test]
    fn p64_reduction_matches_u128_modulo() {
        let cases = [
            (PRIME_64 - 1, PRIME_64 - 1, PRIME_64 - 1),
            (1, 0, 0),
            (123_456_789, 987_654_321, PRIME_64 - 7),
            (u64::MAX / 3, 17, u64::MAX / 5),
        ];
        for (a, b, x) in cases {
            let want = ((a as u128 * x as u128 + b as u128) % PRIME_64 as u128) as u64;
            assert_eq!(permute(a, b, x, HashBits::B64), want);
        }
    }

    #[test]
    fn identical_sets_give_identical_signatures() {
        let cfg = DedupConfig::default();
        let a = minhash(["x y", "y z"], &cfg);
        let b = minhash(["y z", "x y"], &cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 256);
        assert_eq!(estimate_jaccard(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn empty_set_is_sentinel() {
        for bits in [HashBits::B32, HashBits::B64] {
            let cfg = DedupConfig {
                hash_bits: bits,
                ..DedupConfig::default()
            };
            let sig = minhash(Vec::<String>::new(), &cfg);
            assert!(sig.values.iter().all(|&v| v == bits.sentinel()));
            let other = minhash(["kata"], &cfg);
            assert!(other.values.iter().all(|&v| v < bits.prime()));
        }
    }

    #[test]
    fn mismatched_lengths_error() {
        let a = MinHashSignature { values: vec![1, 2] };
        let b = MinHashSignature { values: vec![1] };
        assert_eq!(estimate_jaccard(&a, &b), Err(DedupError::LengthMismatch(2, 1)));
    }

    #[test]
    fn config_validation() {
        let ok = DedupConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            DedupConfig { num_perm: 0, ..ok.clone() },
            DedupConfig { threshold: 1.0, ..ok.clone() },
            DedupConfig { threshold: 0.0, ..ok.clone() },
            DedupConfig { shingle_n: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(DedupError::InvalidConfig(_))));
        }
        assert!(serde_json::from_str::<DedupConfig>(r#"{"hash_bits": 16}"#).is_err());
    }

    #[test]
    fn single_permutation_plan() {
        for t in [0.1, 0.5, 0.95] {
            let plan = plan_bands(&DedupConfig {
                num_perm: 1,
                threshold: t,
                ..DedupConfig::default()
            });
            assert_eq!((plan.bands, plan.rows), (1, 1));
        }
    }

    #[test]
    fn three_identical_texts_form_one_cluster() {
        let text = "sama sahaja teks ini untuk semua dokumen yang ada";
        let docs: Vec<_> = ["a", "b", "c"].iter().map(|id| Document::new(*id, text)).collect();
        let out = dedup_corpus(&docs, &DedupConfig::default()).unwrap();
        assert_eq!(out.clusters, vec![vec!["a", "b", "c"]]);
        assert_eq!(out.kept, vec!["a"]);
    }

    #[test]
    fn empty_documents_only_match_each_other() {
        let docs = vec![
            Document::new("e1", ""),
            Document::new("x", "ini bukan dokumen kosong sama sekali"),
            Document::new("e2", "   "),
        ];
        let out = dedup_corpus(&docs, &DedupConfig::default()).unwrap();
        assert_eq!(out.clusters, vec![vec!["e1", "e2"], vec!["x"]]);
        assert_eq!(out.kept, vec!["e1", "x"]);
    }

    #[test]
    fn duplicate_ids_rejected_before_work() {
        let docs = vec![Document::new("a", "x"), Document::new("a", "y")];
        assert_eq!(
            dedup_corpus(&docs, &DedupConfig::default()),
            Err(DedupError::DuplicateId("a".into()))
        );
    }
}
