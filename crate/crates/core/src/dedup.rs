//! Near-duplicate removal with shingling, MinHash and LSH banding.
//!
//! Yearly filings restate large spans of earlier disclosures nearly verbatim.
//! Each extracted section is shingled into hashed word windows, compressed to
//! a MinHash signature, and bucketed by LSH bands so that sections with high
//! Jaccard similarity land in at least one shared bucket. A later section is
//! dropped when its estimated similarity to any earlier kept section reaches
//! the threshold.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::SectionRecord;
use crate::hashing::{fnv1a64_words, sha256_hex};
use crate::kv::KvFile;

pub const DEFAULT_SHINGLE_K: usize = 5;
pub const DEFAULT_NUM_PERMUTATIONS: usize = 256;
pub const DEFAULT_BANDS: usize = 32;
pub const DEFAULT_ROWS: usize = 8;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// 2^61 - 1, the modulus of the universal hash family.
const MERSENNE_61: u64 = (1 << 61) - 1;

/// Value filling the signature of an empty shingle set.
pub const EMPTY_SLOT: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct ShingleSet {
    pub doc_id: String,
    pub shingles: HashSet<u64>,
    pub k: usize,
}

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }
}

/// Hashes every consecutive `k`-word window of `text` after lowercasing and
/// stripping punctuation. Texts with fewer than `k` words produce an empty
/// set.
pub fn shingle(doc_id: &str, text: &str, k: usize) -> ShingleSet {
    assert!(k >= 1, "shingle window must cover at least one word");
    let words = normalize_words(text);
    let mut shingles = HashSet::new();
    let mut window: Vec<&str> = Vec::with_capacity(k);
    if words.len() >= k {
        for w in words.windows(k) {
            window.clear();
            window.extend(w.iter().map(String::as_str));
            shingles.insert(fnv1a64_words(&window));
        }
    }
    ShingleSet {
        doc_id: doc_id.to_string(),
        shingles,
        k,
    }
}

fn normalize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|token| {
            let word: String = token
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            (!word.is_empty()).then_some(word)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: String,
    pub values: Vec<u64>,
    pub n_perm: usize,
    pub seed: u64,
}

impl MinHashSignature {
    fn compatible(&self, other: &MinHashSignature) -> bool {
        self.n_perm == other.n_perm && self.seed == other.seed
    }
}

/// The seeded permutation family: `n_perm` pairs (a, b) defining
/// h_i(x) = (a_i * x + b_i) mod (2^61 - 1).
fn hash_family(n_perm: usize, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_perm)
        .map(|_| {
            (
                rng.gen_range(1..MERSENNE_61),
                rng.gen_range(0..MERSENNE_61),
            )
        })
        .collect()
}

fn universal_hash(x: u64, a: u64, b: u64) -> u64 {
    ((a as u128 * x as u128 + b as u128) % MERSENNE_61 as u128) as u64
}

/// Per-permutation minima over the shingle set. Empty sets map to
/// [`EMPTY_SLOT`] in every slot.
pub fn minhash(set: &ShingleSet, n_perm: usize, seed: u64) -> MinHashSignature {
    assert!(n_perm >= 1, "signature needs at least one permutation");
    let family = hash_family(n_perm, seed);
    let mut values = vec![EMPTY_SLOT; n_perm];
    for &x in &set.shingles {
        for (slot, &(a, b)) in values.iter_mut().zip(&family) {
            let h = universal_hash(x, a, b);
            if h < *slot {
                *slot = h;
            }
        }
    }
    MinHashSignature {
        doc_id: set.doc_id.clone(),
        values,
        n_perm,
        seed,
    }
}

/// Fraction of matching signature slots, an unbiased estimate of the true
/// Jaccard similarity of the underlying shingle sets.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if !a.compatible(b) {
        return Err(Error::IncompatibleSignatures(format!(
            "(n_perm, seed) = ({}, {}) vs ({}, {})",
            a.n_perm, a.seed, b.n_perm, b.seed
        )));
    }
    let matching = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x == y)
        .count();
    Ok(matching as f64 / a.n_perm as f64)
}

/// Probability that two documents with true Jaccard `j` share at least one
/// band bucket under (`bands`, `rows`) banding: 1 - (1 - j^r)^b.
pub fn band_collision_probability(j: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - j.powi(rows as i32)).powi(bands as i32)
}

#[derive(Debug)]
pub struct LshIndex {
    pub bands: usize,
    pub rows: usize,
    seed: u64,
    buckets: HashMap<(usize, u64), Vec<String>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize, seed: u64) -> Self {
        assert!(bands >= 1 && rows >= 1);
        LshIndex {
            bands,
            rows,
            seed,
            buckets: HashMap::new(),
        }
    }

    fn n_perm(&self) -> usize {
        self.bands * self.rows
    }

    fn check(&self, sig: &MinHashSignature) -> Result<()> {
        if sig.n_perm != self.n_perm() || sig.seed != self.seed {
            return Err(Error::IncompatibleSignatures(format!(
                "index expects (n_perm, seed) = ({}, {}), signature has ({}, {})",
                self.n_perm(),
                self.seed,
                sig.n_perm,
                sig.seed
            )));
        }
        Ok(())
    }

    fn band_key(&self, sig: &MinHashSignature, band: usize) -> (usize, u64) {
        let slice = &sig.values[band * self.rows..(band + 1) * self.rows];
        let mut bytes = Vec::with_capacity(self.rows * 8);
        for v in slice {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        (band, crate::hashing::fnv1a64(&bytes))
    }

    pub fn insert(&mut self, sig: &MinHashSignature) -> Result<()> {
        self.check(sig)?;
        for band in 0..self.bands {
            self.buckets
                .entry(self.band_key(sig, band))
                .or_default()
                .push(sig.doc_id.clone());
        }
        Ok(())
    }
}

/// Every indexed document sharing at least one band bucket with `sig`,
/// excluding `sig` itself.
pub fn lsh_candidates(index: &LshIndex, sig: &MinHashSignature) -> Result<BTreeSet<String>> {
    index.check(sig)?;
    let mut out = BTreeSet::new();
    for band in 0..index.bands {
        if let Some(ids) = index.buckets.get(&index.band_key(sig, band)) {
            out.extend(ids.iter().filter(|id| *id != &sig.doc_id).cloned());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupParams {
    pub k: usize,
    pub n_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams {
            k: DEFAULT_SHINGLE_K,
            n_perm: DEFAULT_NUM_PERMUTATIONS,
            bands: DEFAULT_BANDS,
            rows: DEFAULT_ROWS,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupReport {
    pub input_docs: usize,
    pub removed_docs: usize,
    pub input_tokens: u64,
    pub removed_tokens: u64,
    pub removal_fraction: f64,
    pub pairs_examined: usize,
}

impl DedupReport {
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("input_docs", self.input_docs)
            .set("removed_docs", self.removed_docs)
            .set("input_tokens", self.input_tokens)
            .set("removed_tokens", self.removed_tokens)
            .set("removal_fraction", self.removal_fraction)
            .set("pairs_examined", self.pairs_examined);
        kv
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_kv().write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = KvFile::read(path)?;
        Ok(DedupReport {
            input_docs: kv.get_parsed("input_docs")?,
            removed_docs: kv.get_parsed("removed_docs")?,
            input_tokens: kv.get_parsed("input_tokens")?,
            removed_tokens: kv.get_parsed("removed_tokens")?,
            removal_fraction: kv.get_parsed("removal_fraction")?,
            pairs_examined: kv.get_parsed("pairs_examined")?,
        })
    }
}

/// Removes near-duplicate sections, keeping the earliest occurrence under the
/// canonical (filing date, accession, section rank) order.
///
/// Byte-identical repeats are dropped on a full-content hash before any
/// signature comparison. For the rest, a section is removed when some earlier
/// kept section shares an LSH bucket and the estimated Jaccard similarity
/// reaches `params.threshold`. Signatures are computed in parallel; the
/// keep/remove sweep is serial because each decision depends on the set of
/// prior survivors.
pub fn dedup_corpus(
    records: &[SectionRecord],
    params: &DedupParams,
) -> (Vec<SectionRecord>, DedupReport) {
    assert_eq!(
        params.bands * params.rows,
        params.n_perm,
        "bands x rows must equal the signature length"
    );
    assert!(
        params.threshold > 0.0 && params.threshold <= 1.0,
        "threshold must be in (0, 1]"
    );

    let mut ordered: Vec<&SectionRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.order_key());

    let signatures: Vec<(String, MinHashSignature)> = ordered
        .par_iter()
        .map(|r| {
            let content_hash = sha256_hex(r.text.as_bytes());
            let set = shingle(&r.doc_id(), &r.text, params.k);
            (content_hash, minhash(&set, params.n_perm, params.seed))
        })
        .collect();

    let mut report = DedupReport {
        input_docs: ordered.len(),
        ..DedupReport::default()
    };
    let mut index = LshIndex::new(params.bands, params.rows, params.seed);
    let mut seen_content: HashSet<String> = HashSet::new();
    let mut kept_sigs: HashMap<String, usize> = HashMap::new();
    let mut survivors = Vec::new();

    for (i, record) in ordered.iter().enumerate() {
        let tokens = record.word_count() as u64;
        report.input_tokens += tokens;
        let (content_hash, sig) = &signatures[i];

        if !seen_content.insert(content_hash.clone()) {
            report.removed_docs += 1;
            report.removed_tokens += tokens;
            continue;
        }

        let candidates = lsh_candidates(&index, sig).expect("index built with same params");
        report.pairs_examined += candidates.len();
        let duplicate = candidates.iter().any(|id| {
            let other = &signatures[kept_sigs[id]].1;
            estimate_jaccard(sig, other).expect("same params") >= params.threshold
        });
        if duplicate {
            report.removed_docs += 1;
            report.removed_tokens += tokens;
            continue;
        }

        index.insert(sig).expect("same params");
        kept_sigs.insert(sig.doc_id.clone(), i);
        survivors.push((*record).clone());
    }

    report.removal_fraction = if report.input_tokens == 0 {
        0.0
    } else {
        report.removed_tokens as f64 / report.input_tokens as f64
    };
    (survivors, report)
}
