//! Loss-vs-tokens traces from a streaming reference learner.
//!
//! The learner is an interpolated add-k n-gram model: deterministic, cheap,
//! and enough to produce genuine power-law-shaped learning curves at desk
//! scale. Training is prequential (predict, then update), and at each
//! scheduled token budget the three signals are recorded: mean train loss
//! over the interval, domain validation loss, and general validation loss.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hashing::fnv1a64;
use crate::pack::{TokenShard, SEP_ID};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ADD_K: f64 = 1e-4;
pub const TRACE_HEADER: &str = "tokens_seen,loss,signal,model_label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Train,
    DomainVal,
    GeneralVal,
}

impl Signal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Signal::Train => "train",
            Signal::DomainVal => "domain_val",
            Signal::GeneralVal => "general_val",
        }
    }

    pub fn parse(s: &str) -> Result<Signal> {
        match s {
            "train" => Ok(Signal::Train),
            "domain_val" => Ok(Signal::DomainVal),
            "general_val" => Ok(Signal::GeneralVal),
            other => Err(Error::Format(format!("unknown loss signal {other:?}"))),
        }
    }
}

impl std::fmt::Display for Signal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub tokens_seen: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    pub run_id: String,
    pub signal: Signal,
    pub model_label: String,
    pub points: Vec<TracePoint>,
}

impl LossTrace {
    pub fn tokens(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.tokens_seen).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.loss).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Format(format!("trace {} has no points", self.run_id)));
        }
        for pair in self.points.windows(2) {
            if pair[1].tokens_seen <= pair[0].tokens_seen {
                return Err(Error::Monotonicity(format!(
                    "tokens_seen {} follows {} in trace {}",
                    pair[1].tokens_seen, pair[0].tokens_seen, self.run_id
                )));
            }
        }
        for p in &self.points {
            if !p.loss.is_finite() || p.loss < 0.0 {
                return Err(Error::Format(format!(
                    "loss {} at {} tokens is not a nonnegative finite number",
                    p.loss, p.tokens_seen
                )));
            }
        }
        Ok(())
    }
}

/// Ascending token budgets at which validation runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointSchedule {
    budgets: Vec<u64>,
}

impl CheckpointSchedule {
    pub fn new(budgets: Vec<u64>) -> Result<CheckpointSchedule> {
        if budgets.is_empty() {
            return Err(Error::InvalidSchedule("no checkpoint budgets".into()));
        }
        if budgets[0] == 0 {
            return Err(Error::InvalidSchedule("budget 0 is not reachable".into()));
        }
        for pair in budgets.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidSchedule(format!(
                    "budgets must be strictly ascending, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(CheckpointSchedule { budgets })
    }

    /// The desk-scale default: doubling milestones {B/8, B/4, B/2, B}.
    pub fn geometric_doubling(final_budget: u64) -> Result<CheckpointSchedule> {
        let mut budgets: Vec<u64> = [8, 4, 2, 1]
            .iter()
            .map(|d| final_budget / d)
            .filter(|&b| b > 0)
            .collect();
        budgets.dedup();
        CheckpointSchedule::new(budgets)
    }

    pub fn budgets(&self) -> &[u64] {
        &self.budgets
    }

    pub fn last(&self) -> u64 {
        *self.budgets.last().unwrap()
    }
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Interpolated add-k n-gram model over token ids.
#[derive(Debug, Clone)]
pub struct ReferenceLearner {
    order: usize,
    vocab_size: u32,
    add_k: f64,
    /// Interpolation weight per context length (index 0 = unigram).
    weights: Vec<f64>,
    sep: Option<u32>,
    counts: HashMap<u64, ContextCounts>,
    tokens_observed: u64,
}

impl ReferenceLearner {
    /// Default smoothing per order: the longest context carries most of the
    /// weight. Orders above 3 need [`ReferenceLearner::with_smoothing`].
    pub fn new(order: usize, vocab_size: u32) -> ReferenceLearner {
        let weights = match order {
            1 => vec![1.0],
            2 => vec![0.4, 0.6],
            3 => vec![0.2, 0.3, 0.5],
            _ => panic!("no default interpolation weights for order {order}"),
        };
        ReferenceLearner::with_smoothing(order, vocab_size, DEFAULT_ADD_K, weights).unwrap()
    }

    pub fn with_smoothing(
        order: usize,
        vocab_size: u32,
        add_k: f64,
        weights: Vec<f64>,
    ) -> Result<ReferenceLearner> {
        if order == 0 || weights.len() != order {
            return Err(Error::Config(format!(
                "need one interpolation weight per order, got {} for order {order}",
                weights.len()
            )));
        }
        if vocab_size < 2 {
            return Err(Error::Config(format!("vocab_size {vocab_size} too small")));
        }
        if add_k <= 0.0 || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Config("smoothing constants must be positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "interpolation weights sum to {sum}, expected 1"
            )));
        }
        Ok(ReferenceLearner {
            order,
            vocab_size,
            add_k,
            weights,
            sep: Some(SEP_ID),
            counts: HashMap::new(),
            tokens_observed: 0,
        })
    }

    /// Changes which token id acts as the document separator (`None` treats
    /// every id as ordinary data).
    pub fn with_separator(mut self, sep: Option<u32>) -> ReferenceLearner {
        self.sep = sep;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn tokens_observed(&self) -> u64 {
        self.tokens_observed
    }

    fn context_key(len: usize, suffix: &[u32]) -> u64 {
        let mut bytes = Vec::with_capacity(1 + suffix.len() * 4);
        bytes.push(len as u8);
        for t in suffix {
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        fnv1a64(&bytes)
    }

    /// P(target | context), mixing every available context length. Unseen
    /// contexts fall back to the add-k uniform 1/vocab_size, so an untrained
    /// learner is exactly uniform.
    pub fn predict(&self, context: &[u32], target: u32) -> f64 {
        let longest = (self.order - 1).min(context.len());
        let weight_sum: f64 = self.weights[..=longest].iter().sum();
        let k = self.add_k;
        let kv = k * self.vocab_size as f64;
        let mut p = 0.0;
        for j in 0..=longest {
            let suffix = &context[context.len() - j..];
            let (count, total) = match self.counts.get(&Self::context_key(j, suffix)) {
                Some(c) => (c.next.get(&target).copied().unwrap_or(0), c.total),
                None => (0, 0),
            };
            let p_j = (count as f64 + k) / (total as f64 + kv);
            p += self.weights[j] / weight_sum * p_j;
        }
        p
    }

    fn observe(&mut self, context: &[u32], target: u32) {
        let longest = (self.order - 1).min(context.len());
        for j in 0..=longest {
            let suffix = &context[context.len() - j..];
            let c = self
                .counts
                .entry(Self::context_key(j, suffix))
                .or_default();
            c.total += 1;
            *c.next.entry(target).or_default() += 1;
        }
        self.tokens_observed += 1;
    }

    /// Prequential pass over one packed row: each predictable token is scored
    /// before its counts are updated. Returns (loss sum, positions scored).
    /// Separators reset the context and are never scored.
    pub fn consume_row(&mut self, row: &[u32]) -> (f64, u64) {
        let mut context: Vec<u32> = Vec::with_capacity(row.len());
        let mut loss_sum = 0.0;
        let mut positions = 0u64;
        for &t in row {
            if Some(t) == self.sep {
                context.clear();
                continue;
            }
            loss_sum -= self.predict(&context, t).ln();
            positions += 1;
            self.observe(&context, t);
            context.push(t);
        }
        (loss_sum, positions)
    }

    fn check_shard(&self, shard: &TokenShard) -> Result<()> {
        let max_id = shard
            .sequences
            .iter()
            .flat_map(|row| row.iter().copied())
            .max();
        match max_id {
            Some(id) if id >= self.vocab_size => Err(Error::VocabMismatch {
                learner: self.vocab_size,
                shard: id + 1,
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub std_err: f64,
    pub positions: u64,
}

/// Per-token negative log likelihood over a shard, with the standard error
/// of the mean for statistical tolerances.
pub fn eval_loss_stats(learner: &ReferenceLearner, val: &TokenShard) -> Result<EvalStats> {
    learner.check_shard(val)?;
    let mut n = 0u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut context: Vec<u32> = Vec::new();
    for row in &val.sequences {
        context.clear();
        for &t in row {
            if Some(t) == learner.sep {
                context.clear();
                continue;
            }
            let loss = -learner.predict(&context, t).ln();
            n += 1;
            sum += loss;
            sum_sq += loss * loss;
            context.push(t);
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(
            "validation shard has no predictable positions".into(),
        ));
    }
    let mean = sum / n as f64;
    let std_err = if n > 1 {
        let var = (sum_sq - sum * sum / n as f64) / (n - 1) as f64;
        (var.max(0.0) / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(EvalStats {
        mean,
        std_err,
        positions: n,
    })
}

/// Mean evaluation loss in nats per token. Pure: the learner is unchanged.
pub fn eval_loss(learner: &ReferenceLearner, val: &TokenShard) -> Result<f64> {
    Ok(eval_loss_stats(learner, val)?.mean)
}

/// Validation evaluations recorded at one checkpoint, with the standard
/// errors the trace means hide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointStats {
    pub tokens_seen: u64,
    pub domain: EvalStats,
    pub general: EvalStats,
}

/// Trains through the shards in order, recording all three loss signals at
/// each scheduled budget. Budgets land on row boundaries: a checkpoint fires
/// at the first row whose cumulative token count reaches it, and budgets
/// crossed by the same row coalesce into one point. Training stops after the
/// last budget.
pub fn train_stream(
    learner: &mut ReferenceLearner,
    train: &[TokenShard],
    schedule: &CheckpointSchedule,
    domain_val: &TokenShard,
    general_val: &TokenShard,
    run_id: &str,
    model_label: &str,
) -> Result<[LossTrace; 3]> {
    train_stream_with_stats(
        learner, train, schedule, domain_val, general_val, run_id, model_label,
    )
    .map(|(traces, _)| traces)
}

/// [`train_stream`], additionally returning per-checkpoint evaluation
/// standard errors for statistical tolerances downstream.
#[allow(clippy::too_many_arguments)]
pub fn train_stream_with_stats(
    learner: &mut ReferenceLearner,
    train: &[TokenShard],
    schedule: &CheckpointSchedule,
    domain_val: &TokenShard,
    general_val: &TokenShard,
    run_id: &str,
    model_label: &str,
) -> Result<([LossTrace; 3], Vec<CheckpointStats>)> {
    let available: u64 = train.iter().map(TokenShard::total_tokens).sum();
    if schedule.last() > available {
        return Err(Error::ScheduleExceedsCorpus {
            budget: schedule.last(),
            available,
        });
    }
    for shard in train {
        learner.check_shard(shard)?;
    }
    learner.check_shard(domain_val)?;
    learner.check_shard(general_val)?;

    let budgets = schedule.budgets();
    let mut next_budget = 0usize;
    let mut tokens_seen = 0u64;
    let mut interval_sum = 0.0;
    let mut interval_positions = 0u64;
    let mut last_train_loss = (learner.vocab_size() as f64).ln();
    let mut train_points = Vec::with_capacity(budgets.len());
    let mut domain_points = Vec::with_capacity(budgets.len());
    let mut general_points = Vec::with_capacity(budgets.len());
    let mut checkpoint_stats = Vec::with_capacity(budgets.len());

    'training: for shard in train {
        for row in &shard.sequences {
            let (loss_sum, positions) = learner.consume_row(row);
            interval_sum += loss_sum;
            interval_positions += positions;
            tokens_seen += row.len() as u64;

            if tokens_seen >= budgets[next_budget] {
                while next_budget < budgets.len() && budgets[next_budget] <= tokens_seen {
                    next_budget += 1;
                }
                if interval_positions > 0 {
                    last_train_loss = interval_sum / interval_positions as f64;
                }
                let frozen: &ReferenceLearner = learner;
                let (domain, general) = rayon::join(
                    || eval_loss_stats(frozen, domain_val),
                    || eval_loss_stats(frozen, general_val),
                );
                let (domain, general) = (domain?, general?);
                train_points.push(TracePoint {
                    tokens_seen,
                    loss: last_train_loss,
                });
                domain_points.push(TracePoint {
                    tokens_seen,
                    loss: domain.mean,
                });
                general_points.push(TracePoint {
                    tokens_seen,
                    loss: general.mean,
                });
                checkpoint_stats.push(CheckpointStats {
                    tokens_seen,
                    domain,
                    general,
                });
                interval_sum = 0.0;
                interval_positions = 0;
                if next_budget == budgets.len() {
                    break 'training;
                }
            }
        }
    }

    let trace = |signal: Signal, points: Vec<TracePoint>| LossTrace {
        run_id: run_id.to_string(),
        signal,
        model_label: model_label.to_string(),
        points,
    };
    Ok((
        [
            trace(Signal::Train, train_points),
            trace(Signal::DomainVal, domain_points),
            trace(Signal::GeneralVal, general_points),
        ],
        checkpoint_stats,
    ))
}

const STATS_HEADER: &str = "tokens_seen,signal,mean,std_err,positions,model_label";

/// Writes checkpoint evaluation statistics next to the traces, one row per
/// (checkpoint, validation signal).
pub fn write_checkpoint_stats(
    path: &Path,
    stats: &[CheckpointStats],
    model_label: &str,
) -> Result<()> {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        for (signal, e) in [(Signal::DomainVal, s.domain), (Signal::GeneralVal, s.general)] {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.tokens_seen,
                signal.as_str(),
                e.mean,
                e.std_err,
                e.positions,
                model_label
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads checkpoint statistics for one signal, in file order.
pub fn read_checkpoint_stats(path: &Path, signal: Signal) -> Result<Vec<(u64, EvalStats)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(STATS_HEADER) {
        return Err(Error::Format(format!(
            "{}: expected header {STATS_HEADER:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.splitn(6, ',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "{}: short stats row {line:?}",
                path.display()
            )));
        }
        if Signal::parse(fields[1])? != signal {
            continue;
        }
        let bad = |s: &str| Error::Format(format!("{}: bad number {s:?}", path.display()));
        out.push((
            fields[0].parse().map_err(|_| bad(fields[0]))?,
            EvalStats {
                mean: fields[2].parse().map_err(|_| bad(fields[2]))?,
                std_err: fields[3].parse().map_err(|_| bad(fields[3]))?,
                positions: fields[4].parse().map_err(|_| bad(fields[4]))?,
            },
        ));
    }
    Ok(out)
}

/// Writes traces as `tokens_seen,loss,signal,model_label` rows. The label is
/// the last column, so labels may contain commas.
pub fn write_traces(path: &Path, traces: &[LossTrace]) -> Result<()> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for trace in traces {
        trace.validate()?;
        for p in &trace.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.tokens_seen,
                p.loss,
                trace.signal.as_str(),
                trace.model_label
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a trace file back into one trace per (signal, model_label) pair,
/// in first-appearance order.
pub fn read_traces(path: &Path) -> Result<Vec<LossTrace>> {
    let text = std::fs::read_to_string(path)?;
    let run_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim_end() == TRACE_HEADER => {}
        _ => {
            return Err(Error::Format(format!(
                "{}: expected header {TRACE_HEADER:?}",
                path.display()
            )))
        }
    }

    let mut traces: Vec<LossTrace> = Vec::new();
    for (i, line) in lines {
        let bad = |what: &str| {
            Error::Format(format!("{}:{}: {what}: {line:?}", path.display(), i + 1))
        };
        let mut fields = line.splitn(4, ',');
        let tokens_seen: u64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad("bad tokens_seen"))?;
        let loss: f64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad("bad loss"))?;
        if !loss.is_finite() || loss < 0.0 {
            return Err(bad("loss must be a nonnegative finite number"));
        }
        let signal = Signal::parse(fields.next().ok_or_else(|| bad("missing signal"))?.trim())?;
        let model_label = fields.next().ok_or_else(|| bad("missing model_label"))?.to_string();

        let trace = match traces
            .iter_mut()
            .find(|t| t.signal == signal && t.model_label == model_label)
        {
            Some(t) => t,
            None => {
                traces.push(LossTrace {
                    run_id: run_id.clone(),
                    signal,
                    model_label,
                    points: Vec::new(),
                });
                traces.last_mut().unwrap()
            }
        };
        if let Some(last) = trace.points.last() {
            if tokens_seen <= last.tokens_seen {
                return Err(Error::Monotonicity(format!(
                    "{}:{}: tokens_seen {} does not ascend past {}",
                    path.display(),
                    i + 1,
                    tokens_seen,
                    last.tokens_seen
                )));
            }
        }
        trace.points.push(TracePoint { tokens_seen, loss });
    }
    if traces.is_empty() {
        return Err(Error::Format(format!("{}: no trace rows", path.display())));
    }
    Ok(traces)
}

/// Reads a trace file that must contain exactly one (signal, model_label)
/// series, the shape external LLM logs arrive in.
pub fn ingest_external_trace(path: &Path) -> Result<LossTrace> {
    let mut traces = read_traces(path)?;
    if traces.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected a single (signal, model_label) series, found {}",
            path.display(),
            traces.len()
        )));
    }
    let trace = traces.pop().unwrap();
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::pack;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shard(seq_len: u32, rows: Vec<Vec<u32>>) -> TokenShard {
        assert!(rows.iter().all(|r| r.len() == seq_len as usize));
        TokenShard {
            seq_len,
            sequences: rows,
        }
    }

    #[test]
    fn untrained_learner_scores_uniform_entropy_exactly() {
        let learner = ReferenceLearner::new(3, 256);
        let val = shard(8, vec![vec![3, 7, 1, 250, 9, 9, 2, 4]]);
        let loss = eval_loss(&learner, &val).unwrap();
        assert!((loss - (256f64).ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn constant_stream_converges_to_the_smoothing_floor() {
        let mut learner = ReferenceLearner::new(3, 256);
        for _ in 0..10 {
            learner.consume_row(&vec![7u32; 1000]);
        }
        let val = shard(100, vec![vec![7u32; 100]]);
        let loss = eval_loss(&learner, &val).unwrap();
        assert!(loss <= 0.01, "loss {loss} above the add-k floor");
        assert!(loss > 0.0);
    }

    #[test]
    fn bigram_loss_matches_hand_computed_value() {
        let mut learner = ReferenceLearner::with_smoothing(2, 4, 0.5, vec![0.4, 0.6]).unwrap();
        learner.consume_row(&[1, 2, 1, 2, 1, 3]);
        // Counts: unigrams 1:3 2:2 3:1 (total 6); after-1 2:2 3:1 (total 3);
        // after-2 1:2 (total 2). With k = 0.5 and kV = 2:
        let p = [
            (3.0 + 0.5) / (6.0 + 2.0), // 1 | start (unigram only)
            0.6 * (2.0 + 0.5) / (3.0 + 2.0) + 0.4 * (2.0 + 0.5) / (6.0 + 2.0), // 2 | 1
            0.6 * (2.0 + 0.5) / (2.0 + 2.0) + 0.4 * (3.0 + 0.5) / (6.0 + 2.0), // 1 | 2
            0.6 * (1.0 + 0.5) / (3.0 + 2.0) + 0.4 * (1.0 + 0.5) / (6.0 + 2.0), // 3 | 1
            0.6 * (0.0 + 0.5) / (0.0 + 2.0) + 0.4 * (2.0 + 0.5) / (6.0 + 2.0), // 2 | 3 unseen
            0.6 * (2.0 + 0.5) / (2.0 + 2.0) + 0.4 * (3.0 + 0.5) / (6.0 + 2.0), // 1 | 2
        ];
        let expected = -p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 6.0;
        let loss = eval_loss(&learner, &shard(6, vec![vec![1, 2, 1, 3, 2, 1]])).unwrap();
        assert!((loss - expected).abs() < 1e-9, "{loss} vs {expected}");
    }

    #[test]
    fn eval_is_pure() {
        let mut learner = ReferenceLearner::new(3, 16);
        learner.consume_row(&[1, 2, 3, 4, 1, 2, 3, 4]);
        let before = learner.tokens_observed();
        let val = shard(4, vec![vec![1, 2, 3, 4]]);
        let first = eval_loss(&learner, &val).unwrap();
        let second = eval_loss(&learner, &val).unwrap();
        assert_eq!(first, second);
        assert_eq!(learner.tokens_observed(), before);
    }

    #[test]
    fn predictions_sum_to_one_at_random_contexts() {
        let mut learner = ReferenceLearner::new(3, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let row: Vec<u32> = (0..64).map(|_| rng.gen_range(1..16)).collect();
            learner.consume_row(&row);
        }
        for _ in 0..1000 {
            let len = rng.gen_range(0..3usize);
            let context: Vec<u32> = (0..len).map(|_| rng.gen_range(0..16)).collect();
            let total: f64 = (0..16).map(|t| learner.predict(&context, t)).sum();
            assert!((total - 1.0).abs() < 1e-9, "sum {total} at {context:?}");
        }
    }

    #[test]
    fn separator_resets_context_and_is_never_scored() {
        let mut a = ReferenceLearner::new(3, 8);
        let (_, scored) = a.consume_row(&[1, 2, 0, 3, 4]);
        assert_eq!(scored, 4, "four non-separator targets");

        // The context [2] must not leak across the boundary into P(3).
        let mut b = ReferenceLearner::new(3, 8);
        b.consume_row(&[1, 2, 0, 3, 4]);
        let p_fresh = b.predict(&[], 3);
        let p_stale = b.predict(&[2], 3);
        assert!(p_fresh > p_stale, "3 was only ever observed at a context start");
    }

    #[test]
    fn vocab_mismatch_is_detected() {
        let learner = ReferenceLearner::new(3, 8);
        let err = eval_loss(&learner, &shard(2, vec![vec![1, 9]])).unwrap_err();
        match err {
            Error::VocabMismatch { learner: l, shard: s } => {
                assert_eq!((l, s), (8, 10));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn schedule_validation_rejects_bad_inputs() {
        assert!(matches!(
            CheckpointSchedule::new(vec![]),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(matches!(
            CheckpointSchedule::new(vec![5, 5]),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(matches!(
            CheckpointSchedule::new(vec![5, 4]),
            Err(Error::InvalidSchedule(_))
        ));
        assert_eq!(
            CheckpointSchedule::geometric_doubling(200).unwrap().budgets(),
            &[25, 50, 100, 200]
        );
    }

    fn uniform_shards(tokens: u64, seq_len: u32, vocab: u32, seed: u64) -> Vec<TokenShard> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stream = (0..tokens).map(move |_| rng.gen_range(0..vocab));
        pack(stream, seq_len, tokens).unwrap().0
    }

    #[test]
    fn nothing_learnable_stays_at_uniform_entropy() {
        let vocab = 8u32;
        let train = uniform_shards(2_000_000, 1024, vocab, 1);
        let total: u64 = train.iter().map(TokenShard::total_tokens).sum();
        let domain_val = uniform_shards(8192, 1024, vocab, 2).remove(0);
        let general_val = uniform_shards(8192, 1024, vocab, 3).remove(0);

        let mut learner = ReferenceLearner::new(3, vocab).with_separator(None);
        let schedule = CheckpointSchedule::geometric_doubling(total).unwrap();
        let [_, domain, _] = train_stream(
            &mut learner,
            &train,
            &schedule,
            &domain_val,
            &general_val,
            "iid",
            "order-3",
        )
        .unwrap();

        let stats = eval_loss_stats(&learner, &domain_val).unwrap();
        for point in &domain.points {
            let sigma = stats.std_err.max(1e-6);
            assert!(
                (point.loss - (vocab as f64).ln()).abs() <= 3.0 * sigma,
                "loss {} at {} tokens strays from ln({vocab}) by more than 3 sigma {}",
                point.loss,
                point.tokens_seen,
                sigma
            );
        }
    }

    fn markov_shards(tokens: u64, seq_len: u32, vocab: u32, seed: u64) -> Vec<TokenShard> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = 0u32;
        let stream = (0..tokens).map(move |_| {
            state = if rng.gen_bool(0.7) {
                (state + 1) % vocab
            } else {
                rng.gen_range(0..vocab)
            };
            state
        });
        pack(stream, seq_len, tokens).unwrap().0
    }

    #[test]
    fn structured_corpus_gives_aligned_non_increasing_domain_trace() {
        let vocab = 32u32;
        let train = markov_shards(160_000, 512, vocab, 10);
        let total: u64 = train.iter().map(TokenShard::total_tokens).sum();
        let domain_val = markov_shards(4096, 512, vocab, 11).remove(0);
        let general_val = uniform_shards(4096, 512, vocab, 12).remove(0);

        let mut learner = ReferenceLearner::new(3, vocab).with_separator(None);
        let schedule = CheckpointSchedule::geometric_doubling(total).unwrap();
        let [train_trace, domain, general] = train_stream(
            &mut learner,
            &train,
            &schedule,
            &domain_val,
            &general_val,
            "markov",
            "order-3",
        )
        .unwrap();

        assert_eq!(domain.points.len(), 4);
        assert_eq!(train_trace.tokens(), domain.tokens());
        assert_eq!(domain.tokens(), general.tokens());

        let se = eval_loss_stats(&learner, &domain_val).unwrap().std_err;
        for pair in domain.points.windows(2) {
            assert!(
                pair[1].loss <= pair[0].loss + 3.0 * se * 2.0f64.sqrt(),
                "domain loss rose from {} to {}",
                pair[0].loss,
                pair[1].loss
            );
        }
        assert!(
            domain.points.last().unwrap().loss < (vocab as f64).ln() - 0.5,
            "structured corpus should be clearly learnable"
        );
    }

    #[test]
    fn checkpoint_stats_align_with_the_trace_and_round_trip() {
        let vocab = 32u32;
        let train = markov_shards(40_000, 512, vocab, 20);
        let total: u64 = train.iter().map(TokenShard::total_tokens).sum();
        let domain_val = markov_shards(2048, 512, vocab, 21).remove(0);
        let general_val = uniform_shards(2048, 512, vocab, 22).remove(0);

        let mut learner = ReferenceLearner::new(2, vocab).with_separator(None);
        let schedule = CheckpointSchedule::geometric_doubling(total).unwrap();
        let ([_, domain, general], stats) = train_stream_with_stats(
            &mut learner,
            &train,
            &schedule,
            &domain_val,
            &general_val,
            "markov",
            "order-2",
        )
        .unwrap();

        assert_eq!(stats.len(), domain.points.len());
        for (s, (d, g)) in stats.iter().zip(domain.points.iter().zip(&general.points)) {
            assert_eq!(s.tokens_seen, d.tokens_seen);
            assert_eq!(s.domain.mean, d.loss);
            assert_eq!(s.general.mean, g.loss);
            assert!(s.domain.std_err > 0.0 && s.domain.positions > 0);
        }

        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("stats.csv");
        write_checkpoint_stats(&path, &stats, "order-2").unwrap();
        let domain_rows = read_checkpoint_stats(&path, Signal::DomainVal).unwrap();
        assert_eq!(domain_rows.len(), stats.len());
        for (row, s) in domain_rows.iter().zip(&stats) {
            assert_eq!(row.0, s.tokens_seen);
            assert_eq!(row.1, s.domain);
        }
        assert_eq!(
            read_checkpoint_stats(&path, Signal::GeneralVal).unwrap()[0].1,
            stats[0].general
        );
    }

    #[test]
    fn oversized_schedule_is_rejected() {
        let train = uniform_shards(4096, 512, 8, 1);
        let val = uniform_shards(512, 512, 8, 2).remove(0);
        let schedule = CheckpointSchedule::new(vec![4096, 8192]).unwrap();
        let mut learner = ReferenceLearner::new(3, 8);
        let err = train_stream(&mut learner, &train, &schedule, &val, &val, "r", "m").unwrap_err();
        match err {
            Error::ScheduleExceedsCorpus { budget, available } => {
                assert_eq!((budget, available), (8192, 4096));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trace_file_round_trips_including_comma_labels() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.csv");
        let traces = vec![
            LossTrace {
                run_id: "run".into(),
                signal: Signal::DomainVal,
                model_label: "ngram, order 3".into(),
                points: vec![
                    TracePoint { tokens_seen: 50, loss: 2.5 },
                    TracePoint { tokens_seen: 100, loss: 2.25 },
                ],
            },
            LossTrace {
                run_id: "run".into(),
                signal: Signal::Train,
                model_label: "ngram, order 3".into(),
                points: vec![TracePoint { tokens_seen: 50, loss: 2.75 }],
            },
        ];
        write_traces(&path, &traces).unwrap();
        let back = read_traces(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].model_label, "ngram, order 3");
        assert_eq!(back[0].points, traces[0].points);
        assert_eq!(back[1].signal, Signal::Train);
    }

    #[test]
    fn external_milestone_file_ingests_as_one_trace() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("llm_1b.csv");
        std::fs::write(
            &path,
            "tokens_seen,loss,signal,model_label\n\
             50000000,2.31,domain_val,1B\n\
             100000000,2.18,domain_val,1B\n\
             200000000,2.07,domain_val,1B\n\
             400000000,1.99,domain_val,1B\n",
        )
        .unwrap();
        let trace = ingest_external_trace(&path).unwrap();
        assert_eq!(trace.points.len(), 4);
        assert_eq!(trace.model_label, "1B");
        assert_eq!(trace.points[3].tokens_seen, 400_000_000);
    }

    #[test]
    fn duplicate_tokens_seen_is_a_monotonicity_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("dup.csv");
        std::fs::write(
            &path,
            "tokens_seen,loss,signal,model_label\n100,2.0,train,m\n100,1.9,train,m\n",
        )
        .unwrap();
        assert!(matches!(read_traces(&path), Err(Error::Monotonicity(_))));
    }

    #[test]
    fn negative_loss_is_a_format_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("neg.csv");
        std::fs::write(
            &path,
            "tokens_seen,loss,signal,model_label\n100,-0.5,train,m\n",
        )
        .unwrap();
        assert!(matches!(read_traces(&path), Err(Error::Format(_))));
        let multi = tmp.path().join("multi.csv");
        std::fs::write(
            &multi,
            "tokens_seen,loss,signal,model_label\n100,1.0,train,a\n100,1.0,train,b\n",
        )
        .unwrap();
        assert!(matches!(ingest_external_trace(&multi), Err(Error::Format(_))));
    }
}
