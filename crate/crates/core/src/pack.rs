//! Tokenization, fixed-length sequence packing and validation splits.
//!
//! Documents are tokenized, joined by a separator token, and folded into rows
//! of exactly `seq_len` ids. Packing halts at the last full row under the
//! token budget and drops any trailing partial row. Validation sets are
//! carved out after packing: the domain set by seeded whole-row sampling, the
//! general set packed from an independent text source.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::kv::KvFile;

pub const DEFAULT_SEQ_LEN: u32 = 1024;
/// Reserved separator id for the built-in tokenizers.
pub const SEP_ID: u32 = 0;
/// Reserved unknown-word id for the trained whitespace tokenizer.
pub const UNK_ID: u32 = 1;

const SHARD_MAGIC: &[u8; 4] = b"DAPT";
const SHARD_VERSION: u16 = 1;
/// Rows per shard file, sized for streaming-friendly iteration.
const MAX_SHARD_SEQUENCES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    Whitespace,
    ByteLevel,
    ExternalVocab,
}

impl TokenizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TokenizerKind::Whitespace => "whitespace",
            TokenizerKind::ByteLevel => "byte_level",
            TokenizerKind::ExternalVocab => "external_vocab",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "byte_level" => Ok(TokenizerKind::ByteLevel),
            "external_vocab" => Ok(TokenizerKind::ExternalVocab),
            other => Err(Error::Config(format!("unknown tokenizer kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerSpec {
    pub kind: TokenizerKind,
    pub vocab_size: u32,
    pub vocab_source: Option<std::path::PathBuf>,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        TokenizerSpec {
            kind: TokenizerKind::Whitespace,
            vocab_size: 4096,
            vocab_source: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    kind: TokenizerKind,
    vocab: HashMap<String, u32>,
    inverse: Vec<String>,
    vocab_size: u32,
    sep_id: Option<u32>,
    unk_id: Option<u32>,
    fingerprint: String,
}

impl Tokenizer {
    /// Builds a whitespace tokenizer from corpus word counts. Id 0 is the
    /// separator, id 1 the unknown word, and the remaining `vocab_size - 2`
    /// slots go to the most frequent words (ties broken alphabetically).
    pub fn train_whitespace<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        vocab_size: u32,
    ) -> Result<Tokenizer> {
        if vocab_size < 2 {
            return Err(Error::Vocab(format!(
                "vocab_size {vocab_size} leaves no room for the reserved ids"
            )));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for text in texts {
            for word in text.split_whitespace() {
                *counts.entry(word).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|(wa, ca), (wb, cb)| cb.cmp(ca).then(wa.cmp(wb)));
        ranked.truncate(vocab_size as usize - 2);

        let mut inverse = vec!["<sep>".to_string(), "<unk>".to_string()];
        inverse.extend(ranked.into_iter().map(|(w, _)| w.to_string()));
        let vocab = inverse
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Tokenizer {
            kind: TokenizerKind::Whitespace,
            fingerprint: fingerprint_of("whitespace", &inverse),
            vocab,
            vocab_size: inverse.len() as u32,
            inverse,
            sep_id: Some(SEP_ID),
            unk_id: Some(UNK_ID),
        })
    }

    /// Whitespace tokenizer over an explicit word list; position is id.
    /// `<sep>` and `<unk>` entries, if present, take their reserved roles.
    pub fn with_vocab(kind: TokenizerKind, words: Vec<String>) -> Result<Tokenizer> {
        if words.len() < 2 {
            return Err(Error::Vocab("vocab needs at least two entries".into()));
        }
        let mut vocab = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            if vocab.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Vocab(format!("duplicate vocab entry {w:?}")));
            }
        }
        Ok(Tokenizer {
            kind,
            sep_id: vocab.get("<sep>").copied(),
            unk_id: vocab.get("<unk>").copied(),
            fingerprint: fingerprint_of(kind.as_str(), &words),
            vocab,
            vocab_size: words.len() as u32,
            inverse: words,
        })
    }

    /// Byte tokenizer: id = byte value + 1, id 0 reserved for the separator.
    pub fn byte_level() -> Tokenizer {
        Tokenizer {
            kind: TokenizerKind::ByteLevel,
            vocab: HashMap::new(),
            inverse: Vec::new(),
            vocab_size: 257,
            sep_id: Some(SEP_ID),
            unk_id: None,
            fingerprint: fingerprint_of("byte_level", &[]),
        }
    }

    /// Builds the tokenizer a spec describes, training on `corpus_texts` when
    /// the whitespace kind has no vocab file.
    pub fn build<'a>(
        spec: &TokenizerSpec,
        corpus_texts: impl IntoIterator<Item = &'a str>,
    ) -> Result<Tokenizer> {
        match (spec.kind, &spec.vocab_source) {
            (TokenizerKind::ByteLevel, _) => Ok(Tokenizer::byte_level()),
            (TokenizerKind::Whitespace, None) => {
                Tokenizer::train_whitespace(corpus_texts, spec.vocab_size)
            }
            (kind, Some(path)) => {
                let words = read_vocab_file(path)?;
                Tokenizer::with_vocab(kind, words)
            }
            (TokenizerKind::ExternalVocab, None) => Err(Error::Vocab(
                "external_vocab tokenizer needs a vocab_source file".into(),
            )),
        }
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn sep_id(&self) -> Option<u32> {
        self.sep_id
    }

    /// Vocabulary entries in id order, empty for the byte-level kind. A file
    /// of these lines rebuilds the tokenizer through an external-vocab spec.
    pub fn entries(&self) -> &[String] {
        &self.inverse
    }

    /// Stable digest of the tokenizer's full state, recorded in shard
    /// manifests so mismatched runs are detectable.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        match self.kind {
            TokenizerKind::ByteLevel => Ok(text.bytes().map(|b| b as u32 + 1).collect()),
            TokenizerKind::Whitespace | TokenizerKind::ExternalVocab => text
                .split_whitespace()
                .map(|word| match self.vocab.get(word) {
                    Some(&id) => Ok(id),
                    None => self
                        .unk_id
                        .ok_or_else(|| Error::Vocab(format!("word {word:?} not in vocab"))),
                })
                .collect(),
        }
    }

    pub fn detokenize(&self, ids: &[u32]) -> String {
        match self.kind {
            TokenizerKind::ByteLevel => {
                let bytes: Vec<u8> = ids
                    .iter()
                    .filter(|&&id| id >= 1 && id <= 256)
                    .map(|&id| (id - 1) as u8)
                    .collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            _ => ids
                .iter()
                .map(|&id| {
                    self.inverse
                        .get(id as usize)
                        .map(String::as_str)
                        .unwrap_or("<bad>")
                })
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

fn fingerprint_of(kind: &str, entries: &[String]) -> String {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(kind.as_bytes());
    for e in entries {
        bytes.push(b'\n');
        bytes.extend_from_slice(e.as_bytes());
    }
    sha256_hex(&bytes)
}

fn read_vocab_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Vocab(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenShard {
    pub seq_len: u32,
    pub sequences: Vec<Vec<u32>>,
}

impl TokenShard {
    pub fn num_sequences(&self) -> u64 {
        self.sequences.len() as u64
    }

    pub fn total_tokens(&self) -> u64 {
        self.num_sequences() * self.seq_len as u64
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(SHARD_MAGIC)?;
        out.write_all(&SHARD_VERSION.to_le_bytes())?;
        out.write_all(&self.seq_len.to_le_bytes())?;
        out.write_all(&self.num_sequences().to_le_bytes())?;
        for row in &self.sequences {
            for &id in row {
                out.write_all(&id.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<TokenShard> {
        let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != SHARD_MAGIC {
            return Err(Error::Format(format!(
                "{}: not a token shard (bad magic)",
                path.display()
            )));
        }
        let mut u16buf = [0u8; 2];
        input.read_exact(&mut u16buf)?;
        let version = u16::from_le_bytes(u16buf);
        if version != SHARD_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported shard version {version}",
                path.display()
            )));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let seq_len = u32::from_le_bytes(u32buf);
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let num_sequences = u64::from_le_bytes(u64buf);
        if seq_len == 0 {
            return Err(Error::Format(format!("{}: zero seq_len", path.display())));
        }

        let mut sequences = Vec::with_capacity(num_sequences as usize);
        for _ in 0..num_sequences {
            let mut row = Vec::with_capacity(seq_len as usize);
            for _ in 0..seq_len {
                input.read_exact(&mut u32buf).map_err(|_| {
                    Error::Format(format!("{}: truncated shard body", path.display()))
                })?;
                row.push(u32::from_le_bytes(u32buf));
            }
            sequences.push(row);
        }
        if input.read(&mut [0u8; 1])? != 0 {
            return Err(Error::Format(format!(
                "{}: trailing bytes after shard body",
                path.display()
            )));
        }
        Ok(TokenShard { seq_len, sequences })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackStats {
    pub rows: u64,
    pub packed_tokens: u64,
    pub dropped_tail: u64,
    pub budget_halted: bool,
}

/// Folds a token stream into rows of exactly `seq_len`, stopping at the last
/// full row under `budget`. A trailing partial row is dropped and counted.
pub fn pack(
    stream: impl IntoIterator<Item = u32>,
    seq_len: u32,
    budget: u64,
) -> Result<(Vec<TokenShard>, PackStats)> {
    pack_sharded(stream, seq_len, budget, MAX_SHARD_SEQUENCES)
}

fn pack_sharded(
    stream: impl IntoIterator<Item = u32>,
    seq_len: u32,
    budget: u64,
    shard_cap: usize,
) -> Result<(Vec<TokenShard>, PackStats)> {
    assert!(seq_len >= 1, "seq_len must be positive");
    assert!(budget >= seq_len as u64, "budget must fit one sequence");

    let max_rows = budget / seq_len as u64;
    let mut shards = Vec::new();
    let mut current = TokenShard {
        seq_len,
        sequences: Vec::new(),
    };
    let mut row: Vec<u32> = Vec::with_capacity(seq_len as usize);
    let mut stats = PackStats::default();

    for id in stream {
        row.push(id);
        if row.len() == seq_len as usize {
            current
                .sequences
                .push(std::mem::replace(&mut row, Vec::with_capacity(seq_len as usize)));
            stats.rows += 1;
            stats.packed_tokens += seq_len as u64;
            if current.sequences.len() == shard_cap {
                shards.push(std::mem::replace(
                    &mut current,
                    TokenShard {
                        seq_len,
                        sequences: Vec::new(),
                    },
                ));
            }
            if stats.rows == max_rows {
                stats.budget_halted = true;
                break;
            }
        }
    }

    if stats.rows == 0 {
        return Err(Error::BudgetUnreachable(format!(
            "stream ended after {} tokens, before one full {seq_len}-token sequence",
            row.len()
        )));
    }
    stats.dropped_tail = row.len() as u64;
    if !current.sequences.is_empty() {
        shards.push(current);
    }
    Ok((shards, stats))
}

/// Token streams of consecutive documents joined by a separator token.
pub fn join_documents(docs: Vec<Vec<u32>>, sep: u32) -> impl Iterator<Item = u32> {
    docs.into_iter().enumerate().flat_map(move |(i, doc)| {
        let lead = if i == 0 { None } else { Some(sep) };
        lead.into_iter().chain(doc)
    })
}

#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<TokenShard>,
    pub domain_val: TokenShard,
    pub general_val: TokenShard,
}

impl CorpusSplit {
    pub fn train_tokens(&self) -> u64 {
        self.train.iter().map(TokenShard::total_tokens).sum()
    }

    /// Content-hash check that no row appears in two splits. Meaningful when
    /// rows are distinct, which near-duplicate removal upstream ensures.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        let rows = self
            .train
            .iter()
            .flat_map(|s| &s.sequences)
            .chain(&self.domain_val.sequences)
            .chain(&self.general_val.sequences);
        for row in rows {
            let mut bytes = Vec::with_capacity(row.len() * 4);
            for id in row {
                bytes.extend_from_slice(&id.to_le_bytes());
            }
            if !seen.insert(sha256_hex(&bytes)) {
                return false;
            }
        }
        true
    }
}

/// Carves the held-out sets: `domain_val_tokens` drawn as whole rows sampled
/// uniformly (seeded) from the packed corpus, the general set packed from an
/// independent token stream.
pub fn split_validation(
    shards: Vec<TokenShard>,
    domain_val_tokens: u64,
    general_source: impl IntoIterator<Item = u32>,
    general_val_tokens: u64,
    seed: u64,
) -> Result<CorpusSplit> {
    let seq_len = shards
        .first()
        .map(|s| s.seq_len)
        .ok_or_else(|| Error::InsufficientData("no packed shards to split".into()))?;
    for (name, tokens) in [
        ("domain_val_tokens", domain_val_tokens),
        ("general_val_tokens", general_val_tokens),
    ] {
        if tokens == 0 || tokens % seq_len as u64 != 0 {
            return Err(Error::Config(format!(
                "{name} = {tokens} is not a positive multiple of seq_len {seq_len}"
            )));
        }
    }

    let all_rows: Vec<Vec<u32>> = shards.into_iter().flat_map(|s| s.sequences).collect();
    let n_val = (domain_val_tokens / seq_len as u64) as usize;
    if n_val >= all_rows.len() {
        return Err(Error::InsufficientData(format!(
            "corpus has {} rows, cannot hold out {n_val} for validation",
            all_rows.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, all_rows.len(), n_val).into_vec();
    chosen.sort_unstable();
    let chosen_set: std::collections::HashSet<usize> = chosen.iter().copied().collect();

    let mut domain_val = TokenShard {
        seq_len,
        sequences: Vec::with_capacity(n_val),
    };
    let mut train_rows = Vec::with_capacity(all_rows.len() - n_val);
    for (i, row) in all_rows.into_iter().enumerate() {
        if chosen_set.contains(&i) {
            domain_val.sequences.push(row);
        } else {
            train_rows.push(row);
        }
    }

    let (general_shards, general_stats) =
        match pack(general_source, seq_len, general_val_tokens) {
            Ok(packed) => packed,
            Err(Error::BudgetUnreachable(msg)) => {
                return Err(Error::InsufficientData(format!(
                    "general source too short for the validation set: {msg}"
                )))
            }
            Err(e) => return Err(e),
        };
    if general_stats.packed_tokens < general_val_tokens {
        return Err(Error::InsufficientData(format!(
            "general source packed only {} of {general_val_tokens} validation tokens",
            general_stats.packed_tokens
        )));
    }
    let general_val = TokenShard {
        seq_len,
        sequences: general_shards.into_iter().flat_map(|s| s.sequences).collect(),
    };

    let mut train = Vec::new();
    for chunk in train_rows.chunks(MAX_SHARD_SEQUENCES) {
        train.push(TokenShard {
            seq_len,
            sequences: chunk.to_vec(),
        });
    }
    Ok(CorpusSplit {
        train,
        domain_val,
        general_val,
    })
}

/// Sidecar metadata for a packed corpus, written as a checksummed key-value
/// file next to the shards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardManifest {
    pub total_tokens: u64,
    pub num_sequences: u64,
    pub seq_len: u32,
    pub vocab_size: u32,
    pub tokenizer_fingerprint: String,
    pub source_hash: String,
    pub validation_sampling: String,
}

impl ShardManifest {
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("total_tokens", self.total_tokens)
            .set("num_sequences", self.num_sequences)
            .set("seq_len", self.seq_len)
            .set("vocab_size", self.vocab_size)
            .set("tokenizer_fingerprint", &self.tokenizer_fingerprint)
            .set("source_hash", &self.source_hash)
            .set("validation_sampling", &self.validation_sampling);
        kv
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_kv().write(path)
    }

    pub fn read(path: &Path) -> Result<ShardManifest> {
        let kv = KvFile::read(path)?;
        Ok(ShardManifest {
            total_tokens: kv.get_parsed("total_tokens")?,
            num_sequences: kv.get_parsed("num_sequences")?,
            seq_len: kv.get_parsed("seq_len")?,
            vocab_size: kv.get_parsed("vocab_size")?,
            tokenizer_fingerprint: kv.get_parsed("tokenizer_fingerprint")?,
            source_hash: kv.get_parsed("source_hash")?,
            validation_sampling: kv.get_parsed("validation_sampling")?,
        })
    }
}
