//! Run configuration: one flat key=value file, environment overrides for the
//! endpoint and cache directory, and flag overrides on top. Every stage
//! parameter is validated against its module's preconditions before any
//! stage runs, and the canonical echo of the config doubles as the stage
//! fingerprint input for resumable runs.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use finscale_core::dedup::{
    DedupParams, DEFAULT_BANDS, DEFAULT_NUM_PERMUTATIONS, DEFAULT_ROWS, DEFAULT_SHINGLE_K,
    DEFAULT_THRESHOLD,
};
use finscale_core::edgar::FormType;
use finscale_core::extract::DEFAULT_MIN_CHARS;
use finscale_core::hashing::{derive_seed, sha256_hex};
use finscale_core::kv::KvFile;
use finscale_core::pack::{TokenizerKind, TokenizerSpec, DEFAULT_SEQ_LEN};
use finscale_core::trainer::{CheckpointSchedule, DEFAULT_ADD_K, DEFAULT_ORDER};
use finscale_core::analysis::{
    DEFAULT_BAND_FACTOR, DEFAULT_BASELINE_PARAMS, DEFAULT_BASELINE_TOKENS, DEFAULT_GAMMA,
    DEFAULT_TAU,
};
use finscale_core::{Error, Result};

pub const ENV_ENDPOINT: &str = "FINSCALE_ENDPOINT";
pub const ENV_CACHE_DIR: &str = "FINSCALE_CACHE_DIR";

/// Checkpoint budgets: either the geometric halving ladder ending at the
/// budget, or an explicit ascending list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleSpec {
    Geometric,
    Explicit(Vec<u64>),
}

impl ScheduleSpec {
    pub fn resolve(&self, token_budget: u64) -> Result<CheckpointSchedule> {
        match self {
            ScheduleSpec::Geometric => CheckpointSchedule::geometric_doubling(token_budget),
            ScheduleSpec::Explicit(budgets) => CheckpointSchedule::new(budgets.clone()),
        }
    }

    fn as_value(&self) -> String {
        match self {
            ScheduleSpec::Geometric => "geometric".into(),
            ScheduleSpec::Explicit(budgets) => budgets
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        }
    }

    fn parse(value: &str) -> Result<ScheduleSpec> {
        if value.trim() == "geometric" {
            return Ok(ScheduleSpec::Geometric);
        }
        let budgets = value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("schedule entry `{s}` is not an integer")))
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(ScheduleSpec::Explicit(budgets))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // fetch
    pub endpoint: String,
    pub user_agent: String,
    pub rate_cap: usize,
    pub cache_dir: Option<PathBuf>,
    pub run_date: NaiveDate,
    pub company_limit: usize,
    pub forms: Vec<FormType>,
    pub years: u32,
    // extract
    pub min_section_chars: usize,
    // dedup
    pub shingle_k: usize,
    pub num_permutations: usize,
    pub bands: usize,
    pub rows: usize,
    pub dedup_threshold: f64,
    // pack
    pub tokenizer: TokenizerKind,
    pub vocab_file: Option<PathBuf>,
    pub vocab_size: u32,
    pub seq_len: u32,
    pub token_budget: u64,
    pub domain_val_tokens: u64,
    pub general_val_tokens: u64,
    pub general_source: PathBuf,
    // train
    pub schedule: ScheduleSpec,
    pub learner_orders: Vec<usize>,
    pub add_k: f64,
    // analyze
    pub bootstrap_draws: usize,
    pub tau: f64,
    pub gamma: f64,
    pub band_factor: f64,
    pub baseline_params: f64,
    pub baseline_tokens: f64,
    pub extrapolation_params: Vec<f64>,
    // run
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_timestamp: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            user_agent: "finscale research user@example.invalid".into(),
            rate_cap: 8,
            cache_dir: None,
            run_date: NaiveDate::from_ymd_opt(2025, 12, 31).unwrap(),
            company_limit: 8,
            forms: vec![FormType::Form10K, FormType::Form10Q, FormType::Def14A],
            years: 10,
            min_section_chars: DEFAULT_MIN_CHARS,
            shingle_k: DEFAULT_SHINGLE_K,
            num_permutations: DEFAULT_NUM_PERMUTATIONS,
            bands: DEFAULT_BANDS,
            rows: DEFAULT_ROWS,
            dedup_threshold: DEFAULT_THRESHOLD,
            tokenizer: TokenizerKind::Whitespace,
            vocab_file: None,
            vocab_size: 4096,
            seq_len: DEFAULT_SEQ_LEN,
            token_budget: 4 << 20,
            domain_val_tokens: 64 << 10,
            general_val_tokens: 64 << 10,
            general_source: PathBuf::new(),
            schedule: ScheduleSpec::Geometric,
            learner_orders: vec![2, DEFAULT_ORDER],
            add_k: DEFAULT_ADD_K,
            bootstrap_draws: 1000,
            tau: DEFAULT_TAU,
            gamma: DEFAULT_GAMMA,
            band_factor: DEFAULT_BAND_FACTOR,
            baseline_params: DEFAULT_BASELINE_PARAMS,
            baseline_tokens: DEFAULT_BASELINE_TOKENS,
            extrapolation_params: vec![3e9, 7e9, 13e9, 32e9, 70e9],
            seed: 42,
            out_dir: PathBuf::new(),
            emit_timestamp: false,
        }
    }
}

pub const STAGES: [&str; 7] = [
    "fetch", "extract", "dedup", "pack", "train", "analyze", "report",
];

/// Config keys each stage's output depends on; changing one invalidates the
/// stage's done marker and everything downstream.
fn stage_keys(stage: &str) -> &'static [&'static str] {
    match stage {
        "fetch" => &["endpoint", "run_date", "company_limit", "forms", "years"],
        "extract" => &["min_section_chars"],
        "dedup" => &[
            "shingle_k",
            "num_permutations",
            "bands",
            "rows",
            "dedup_threshold",
            "seed",
        ],
        "pack" => &[
            "tokenizer",
            "vocab_file",
            "vocab_size",
            "seq_len",
            "token_budget",
            "domain_val_tokens",
            "general_val_tokens",
            "general_source",
            "seed",
        ],
        "train" => &["schedule", "learner_orders", "add_k", "seed"],
        "analyze" => &[
            "bootstrap_draws",
            "tau",
            "gamma",
            "band_factor",
            "baseline_params",
            "baseline_tokens",
            "extrapolation_params",
            "seed",
        ],
        "report" => &["emit_timestamp"],
        other => panic!("unknown stage {other}"),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let kv = KvFile::read(path)?;
        let mut config = RunConfig::default();
        for (key, value) in kv.iter() {
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Sets one field from its config-file spelling. Unknown keys are
    /// rejected so a typo cannot silently fall back to a default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("key `{key}`: {what} (got `{value}`)"));
        match key {
            "endpoint" => self.endpoint = value.to_string(),
            "user_agent" => self.user_agent = value.to_string(),
            "rate_cap" => self.rate_cap = value.parse().map_err(|_| bad("expected an integer"))?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "run_date" => {
                self.run_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                    .map_err(|_| bad("expected YYYY-MM-DD"))?
            }
            "company_limit" => {
                self.company_limit = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "forms" => {
                self.forms = value
                    .split(',')
                    .map(|s| {
                        FormType::parse(s).ok_or_else(|| {
                            Error::Config(format!("key `forms`: unknown form type `{}`", s.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "years" => self.years = value.parse().map_err(|_| bad("expected an integer"))?,
            "min_section_chars" => {
                self.min_section_chars = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "shingle_k" => self.shingle_k = value.parse().map_err(|_| bad("expected an integer"))?,
            "num_permutations" => {
                self.num_permutations = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "bands" => self.bands = value.parse().map_err(|_| bad("expected an integer"))?,
            "rows" => self.rows = value.parse().map_err(|_| bad("expected an integer"))?,
            "dedup_threshold" => {
                self.dedup_threshold = value.parse().map_err(|_| bad("expected a number"))?
            }
            "tokenizer" => self.tokenizer = TokenizerKind::parse(value)?,
            "vocab_file" => self.vocab_file = Some(PathBuf::from(value)),
            "vocab_size" => {
                self.vocab_size = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "seq_len" => self.seq_len = value.parse().map_err(|_| bad("expected an integer"))?,
            "token_budget" => {
                self.token_budget = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "domain_val_tokens" => {
                self.domain_val_tokens = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "general_val_tokens" => {
                self.general_val_tokens = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "general_source" => self.general_source = PathBuf::from(value),
            "schedule" => self.schedule = ScheduleSpec::parse(value)?,
            "learner_orders" => {
                self.learner_orders = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| bad("expected comma-separated integers"))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "add_k" => self.add_k = value.parse().map_err(|_| bad("expected a number"))?,
            "bootstrap_draws" => {
                self.bootstrap_draws = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "tau" => self.tau = value.parse().map_err(|_| bad("expected a number"))?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad("expected a number"))?,
            "band_factor" => {
                self.band_factor = value.parse().map_err(|_| bad("expected a number"))?
            }
            "baseline_params" => {
                self.baseline_params = value.parse().map_err(|_| bad("expected a number"))?
            }
            "baseline_tokens" => {
                self.baseline_tokens = value.parse().map_err(|_| bad("expected a number"))?
            }
            "extrapolation_params" => {
                self.extrapolation_params = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| bad("expected comma-separated numbers"))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an integer"))?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "emit_timestamp" => {
                self.emit_timestamp = value.parse().map_err(|_| bad("expected true or false"))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown config key `{other}`; check the spelling against the documented keys"
                )))
            }
        }
        Ok(())
    }

    /// Applies `FINSCALE_ENDPOINT` and `FINSCALE_CACHE_DIR` from the process
    /// environment. Called between file parsing and flag overrides.
    pub fn apply_env(&mut self) {
        let vars: Vec<(String, String)> = std::env::vars().collect();
        self.apply_env_pairs(&vars);
    }

    fn apply_env_pairs(&mut self, vars: &[(String, String)]) {
        for (key, value) in vars {
            match key.as_str() {
                ENV_ENDPOINT => self.endpoint = value.clone(),
                ENV_CACHE_DIR => self.cache_dir = Some(PathBuf::from(value)),
                _ => {}
            }
        }
    }

    pub fn resolved_cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out_dir.join(stage)
    }

    /// Per-stage RNG seed derived from the single top-level seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn dedup_params(&self) -> DedupParams {
        DedupParams {
            k: self.shingle_k,
            n_perm: self.num_permutations,
            bands: self.bands,
            rows: self.rows,
            threshold: self.dedup_threshold,
            seed: self.stage_seed("dedup"),
        }
    }

    pub fn tokenizer_spec(&self) -> TokenizerSpec {
        TokenizerSpec {
            kind: self.tokenizer,
            vocab_size: self.vocab_size,
            vocab_source: self.vocab_file.clone(),
        }
    }

    /// Checks every field against the preconditions of the module that
    /// consumes it, naming the offending fields.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));

        if self.endpoint.trim().is_empty() {
            return fail("endpoint must be set (URL or local fixture directory)".into());
        }
        if self.out_dir.as_os_str().is_empty() {
            return fail("out_dir must be set".into());
        }
        if self.general_source.as_os_str().is_empty() {
            return fail("general_source must point at an out-of-domain text file".into());
        }
        let ua = self.user_agent.trim();
        if ua.is_empty() || !(ua.contains(' ') || ua.contains('@')) {
            return fail("user_agent must identify the operator (name and contact)".into());
        }
        if self.rate_cap == 0 {
            return fail("rate_cap must be at least 1".into());
        }
        if self.company_limit == 0 {
            return fail("company_limit must be at least 1".into());
        }
        if self.forms.is_empty() {
            return fail("forms must list at least one form type".into());
        }
        if self.years == 0 {
            return fail("years must be at least 1".into());
        }
        if self.shingle_k == 0 {
            return fail("shingle_k must be at least 1".into());
        }
        if self.bands * self.rows != self.num_permutations {
            return fail(format!(
                "bands ({}) * rows ({}) = {} must equal num_permutations ({})",
                self.bands,
                self.rows,
                self.bands * self.rows,
                self.num_permutations
            ));
        }
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold <= 1.0) {
            return fail(format!(
                "dedup_threshold must be in (0, 1], got {}",
                self.dedup_threshold
            ));
        }
        if self.tokenizer == TokenizerKind::ExternalVocab && self.vocab_file.is_none() {
            return fail("tokenizer external_vocab requires vocab_file".into());
        }
        if self.vocab_size < 2 {
            return fail(format!("vocab_size must be at least 2, got {}", self.vocab_size));
        }
        if self.seq_len == 0 {
            return fail("seq_len must be at least 1".into());
        }
        if self.token_budget < self.seq_len as u64 {
            return fail(format!(
                "token_budget ({}) must be at least seq_len ({})",
                self.token_budget, self.seq_len
            ));
        }
        for (name, tokens) in [
            ("domain_val_tokens", self.domain_val_tokens),
            ("general_val_tokens", self.general_val_tokens),
        ] {
            if tokens == 0 || tokens % self.seq_len as u64 != 0 {
                return fail(format!(
                    "{name} ({tokens}) must be a positive multiple of seq_len ({})",
                    self.seq_len
                ));
            }
        }
        self.schedule
            .resolve(self.token_budget)
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if self.learner_orders.is_empty() {
            return fail("learner_orders must list at least one order".into());
        }
        for &order in &self.learner_orders {
            if !(1..=3).contains(&order) {
                return fail(format!("learner_orders entries must be 1 to 3, got {order}"));
            }
        }
        if !(self.add_k > 0.0) {
            return fail(format!("add_k must be positive, got {}", self.add_k));
        }
        if self.bootstrap_draws == 0 {
            return fail("bootstrap_draws must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if !self.gamma.is_finite() {
            return fail(format!("gamma must be finite, got {}", self.gamma));
        }
        if !(self.band_factor >= 1.0) {
            return fail(format!(
                "band_factor must be at least 1, got {}",
                self.band_factor
            ));
        }
        for (name, v) in [
            ("baseline_params", self.baseline_params),
            ("baseline_tokens", self.baseline_tokens),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.extrapolation_params.is_empty() {
            return fail("extrapolation_params must list at least one model size".into());
        }
        for &p in &self.extrapolation_params {
            if !(p > 0.0 && p.is_finite()) {
                return fail(format!("extrapolation_params entries must be positive, got {p}"));
            }
        }
        Ok(())
    }

    /// Canonical key=value form of the full config: the config echo in the
    /// report and the input to stage fingerprints.
    pub fn echo_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("endpoint", &self.endpoint)
            .set("user_agent", &self.user_agent)
            .set("rate_cap", self.rate_cap)
            .set("cache_dir", self.resolved_cache_dir().display())
            .set("run_date", self.run_date.format("%Y-%m-%d"))
            .set("company_limit", self.company_limit)
            .set(
                "forms",
                self.forms
                    .iter()
                    .map(FormType::as_str)
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .set("years", self.years)
            .set("min_section_chars", self.min_section_chars)
            .set("shingle_k", self.shingle_k)
            .set("num_permutations", self.num_permutations)
            .set("bands", self.bands)
            .set("rows", self.rows)
            .set("dedup_threshold", self.dedup_threshold)
            .set("tokenizer", self.tokenizer.as_str())
            .set(
                "vocab_file",
                self.vocab_file
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            )
            .set("vocab_size", self.vocab_size)
            .set("seq_len", self.seq_len)
            .set("token_budget", self.token_budget)
            .set("domain_val_tokens", self.domain_val_tokens)
            .set("general_val_tokens", self.general_val_tokens)
            .set("general_source", self.general_source.display())
            .set("schedule", self.schedule.as_value())
            .set(
                "learner_orders",
                self.learner_orders
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .set("add_k", self.add_k)
            .set("bootstrap_draws", self.bootstrap_draws)
            .set("tau", self.tau)
            .set("gamma", self.gamma)
            .set("band_factor", self.band_factor)
            .set("baseline_params", self.baseline_params)
            .set("baseline_tokens", self.baseline_tokens)
            .set(
                "extrapolation_params",
                self.extrapolation_params
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .set("seed", self.seed)
            .set("out_dir", self.out_dir.display())
            .set("emit_timestamp", self.emit_timestamp);
        kv
    }

    /// Digest of the config keys one stage depends on.
    pub fn stage_config_fingerprint(&self, stage: &str) -> String {
        let echo = self.echo_kv();
        let mut body = String::new();
        for key in stage_keys(stage) {
            body.push_str(key);
            body.push('=');
            body.push_str(echo.get(key).unwrap_or_default());
            body.push('\n');
        }
        sha256_hex(body.as_bytes())
    }
}
