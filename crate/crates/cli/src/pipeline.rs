//! Stage orchestration. Each stage reads its predecessor's artifacts from
//! `<out_dir>/<stage>/`, writes its own, and records a completion marker
//! holding a config fingerprint, an input fingerprint, and a checksum per
//! output file. A rerun skips any stage whose marker still matches, so
//! deleting one stage directory recomputes only that stage and everything
//! downstream of it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use finscale_core::analysis::{
    bootstrap_exponent, drift_check, extrapolate_tokens, fit_power_law,
    fit_saturating_power_law, frontier, marginal_gain, write_estimates_csv, write_fit_summaries,
    write_frontier_csv, FitForm, FitSummary, FrontierPoint, TokenEstimate,
};
use finscale_core::dedup::dedup_corpus;
use finscale_core::edgar::{ClientConfig, EdgarClient, FilingDocument};
use finscale_core::extract::{
    extract_whitelist, read_section_records, write_section_records, ExtractStats,
};
use finscale_core::hashing::{derive_seed, sha256_file, sha256_hex};
use finscale_core::kv::KvFile;
use finscale_core::pack::{
    join_documents, pack, split_validation, ShardManifest, TokenShard, Tokenizer, TokenizerKind,
    SEP_ID,
};
use finscale_core::trainer::{
    read_traces, train_stream_with_stats, write_checkpoint_stats, write_traces, LossTrace,
    ReferenceLearner, Signal,
};

use crate::config::{RunConfig, STAGES};
use crate::plot;
use crate::report::{render_table1, RunReport};

const DONE_MARKER: &str = "done.kv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub skipped: bool,
}

/// Runs every stage through `last`, skipping stages whose artifacts are
/// already up to date.
pub fn run_through(config: &RunConfig, last: &str) -> Result<Vec<StageOutcome>> {
    config.validate()?;
    let last_idx = STAGES
        .iter()
        .position(|s| *s == last)
        .with_context(|| format!("unknown stage {last:?}"))?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;

    let mut outcomes = Vec::new();
    let mut input_fp = "-".to_string();
    for stage in &STAGES[..=last_idx] {
        let dir = config.stage_dir(stage);
        let config_fp = config.stage_config_fingerprint(stage);

        // The report stage is cheap and always rerenders.
        if *stage != "report" {
            if let Some(digest) = valid_marker_digest(&dir, &config_fp, &input_fp) {
                log::info!("stage {stage}: up to date");
                outcomes.push(StageOutcome {
                    stage,
                    skipped: true,
                });
                input_fp = digest;
                continue;
            }
        }

        log::info!("stage {stage}: running");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let outputs = match *stage {
            "fetch" => stage_fetch(config, &dir),
            "extract" => stage_extract(config, &dir),
            "dedup" => stage_dedup(config, &dir),
            "pack" => stage_pack(config, &dir),
            "train" => stage_train(config, &dir),
            "analyze" => stage_analyze(config, &dir),
            "report" => stage_report(config, &dir),
            other => bail!("unknown stage {other:?}"),
        }
        .with_context(|| format!("stage {stage} failed in {}", dir.display()))?;

        input_fp = write_marker(&dir, &config_fp, &input_fp, &outputs)?;
        outcomes.push(StageOutcome {
            stage,
            skipped: false,
        });
    }
    Ok(outcomes)
}

/// The full run: all stages, then the assembled report.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    run_through(config, "report")?;
    RunReport::load(config)
}

/// Returns the marker's output digest when the stage directory still matches
/// it: same stage config, same upstream inputs, every output file present
/// with an unchanged checksum.
fn valid_marker_digest(dir: &Path, config_fp: &str, input_fp: &str) -> Option<String> {
    let kv = KvFile::read(&dir.join(DONE_MARKER)).ok()?;
    if kv.get("config") != Some(config_fp) || kv.get("input") != Some(input_fp) {
        return None;
    }
    let mut lines = Vec::new();
    for (key, recorded) in kv.iter() {
        if let Some(rel) = key.strip_prefix("output.") {
            if sha256_file(&dir.join(rel)).ok()? != recorded {
                return None;
            }
            lines.push(format!("{rel}={recorded}"));
        }
    }
    if lines.is_empty() {
        return None;
    }
    lines.sort();
    Some(sha256_hex(lines.join("\n").as_bytes()))
}

fn write_marker(
    dir: &Path,
    config_fp: &str,
    input_fp: &str,
    outputs: &[PathBuf],
) -> Result<String> {
    let mut kv = KvFile::new();
    kv.set("config", config_fp).set("input", input_fp);
    let mut lines = Vec::new();
    for path in outputs {
        let rel = path
            .strip_prefix(dir)
            .with_context(|| format!("output {} outside stage dir", path.display()))?
            .to_string_lossy()
            .into_owned();
        let hash = sha256_file(path).with_context(|| format!("hashing {}", path.display()))?;
        kv.set(&format!("output.{rel}"), &hash);
        lines.push(format!("{rel}={hash}"));
    }
    kv.write(&dir.join(DONE_MARKER))?;
    lines.sort();
    Ok(sha256_hex(lines.join("\n").as_bytes()))
}

fn stage_fetch(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let client = EdgarClient::new(ClientConfig {
        endpoint: config.endpoint.clone(),
        user_agent: config.user_agent.clone(),
        rate_cap: config.rate_cap,
        cache_dir: config.resolved_cache_dir(),
        run_date: config.run_date,
    })?;
    let companies = client.fetch_ticker_cik_map(config.company_limit)?;

    let filings_path = dir.join("filings.jsonl");
    let mut out = BufWriter::new(File::create(&filings_path)?);
    let mut filings = 0usize;
    for company in &companies {
        for filing_ref in client.list_filings(company, &config.forms, config.years)? {
            let doc = client
                .fetch_filing(&filing_ref)
                .with_context(|| format!("fetching {}", filing_ref.accession_id))?;
            serde_json::to_writer(&mut out, &doc)?;
            out.write_all(b"\n")?;
            filings += 1;
        }
    }
    out.flush()?;
    if filings == 0 {
        bail!("no filings matched the requested forms and window");
    }

    let mut kv = KvFile::new();
    kv.set("companies", companies.len())
        .set("filings", filings);
    let kv_path = dir.join("fetch.kv");
    kv.write(&kv_path)?;
    Ok(vec![filings_path, kv_path])
}

fn stage_extract(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let src = config.stage_dir("fetch").join("filings.jsonl");
    let file = File::open(&src).with_context(|| format!("reading {}", src.display()))?;

    let mut stats = ExtractStats::default();
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let doc: FilingDocument = serde_json::from_str(&line?)?;
        let extracted = extract_whitelist(&doc, config.min_section_chars);
        stats.input_filings += 1;
        stats.total_chars += extracted.total_chars;
        if extracted.discarded {
            stats.discarded_filings += 1;
            log::debug!(
                "discarding {}: {}",
                doc.filing_ref.accession_id,
                extracted.discard_reason.as_deref().unwrap_or("unknown")
            );
        } else {
            stats.kept_filings += 1;
        }
        records.extend(extracted.into_records());
    }
    stats.sections_emitted = records.len();
    records.sort_by_key(|r| r.order_key());

    let sections_path = dir.join("sections.jsonl");
    write_section_records(&sections_path, &records)?;

    let mut kv = KvFile::new();
    kv.set("input_filings", stats.input_filings)
        .set("kept_filings", stats.kept_filings)
        .set("discarded_filings", stats.discarded_filings)
        .set("sections_emitted", stats.sections_emitted)
        .set("total_chars", stats.total_chars)
        .set("discard_fraction", stats.discard_fraction());
    let kv_path = dir.join("extract.kv");
    kv.write(&kv_path)?;
    Ok(vec![sections_path, kv_path])
}

fn stage_dedup(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let src = config.stage_dir("extract").join("sections.jsonl");
    let records =
        read_section_records(&src).with_context(|| format!("reading {}", src.display()))?;
    let (survivors, report) = dedup_corpus(&records, &config.dedup_params());

    let survivors_path = dir.join("survivors.jsonl");
    write_section_records(&survivors_path, &survivors)?;
    let report_path = dir.join("report.kv");
    report.write(&report_path)?;
    Ok(vec![survivors_path, report_path])
}

fn stage_pack(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let src = config.stage_dir("dedup").join("survivors.jsonl");
    let survivors =
        read_section_records(&src).with_context(|| format!("reading {}", src.display()))?;
    if survivors.is_empty() {
        bail!("no documents survived dedup; nothing to pack");
    }

    let spec = config.tokenizer_spec();
    let tokenizer = Tokenizer::build(&spec, survivors.iter().map(|r| r.text.as_str()))?;
    let docs: Vec<Vec<u32>> = survivors
        .iter()
        .map(|r| tokenizer.tokenize(&r.text))
        .collect::<finscale_core::Result<_>>()?;

    // The training budget plus the domain validation rows that the split
    // carves back out, so the remaining train set still covers the budget.
    let packed_budget = config.token_budget + config.domain_val_tokens;
    let stream: Box<dyn Iterator<Item = u32>> = match tokenizer.sep_id() {
        Some(sep) => Box::new(join_documents(docs, sep)),
        None => Box::new(docs.into_iter().flatten()),
    };
    let (shards, stats) = pack(stream, config.seq_len, packed_budget)?;
    if stats.packed_tokens < packed_budget {
        bail!(
            "corpus too small: packed {} tokens, need {} (token_budget {} + domain_val_tokens {})",
            stats.packed_tokens,
            packed_budget,
            config.token_budget,
            config.domain_val_tokens
        );
    }

    // The general text is tokenized as a single document: no separators, so
    // its row contents do not shift when the domain corpus changes.
    let general_text = std::fs::read_to_string(&config.general_source)
        .with_context(|| format!("reading {}", config.general_source.display()))?;
    let general_tokens = tokenizer.tokenize(&general_text)?;
    let split = split_validation(
        shards,
        config.domain_val_tokens,
        general_tokens,
        config.general_val_tokens,
        config.stage_seed("pack"),
    )?;

    let mut outputs = Vec::new();
    for (i, shard) in split.train.iter().enumerate() {
        let path = dir.join(format!("train-{i:04}.shard"));
        shard.write(&path)?;
        outputs.push(path);
    }
    let domain_val_path = dir.join("domain_val.shard");
    split.domain_val.write(&domain_val_path)?;
    let general_val_path = dir.join("general_val.shard");
    split.general_val.write(&general_val_path)?;

    let vocab_path = dir.join("tokenizer.vocab");
    let mut vocab = tokenizer.entries().join("\n");
    if !vocab.is_empty() {
        vocab.push('\n');
    }
    std::fs::write(&vocab_path, vocab)?;

    let manifest = ShardManifest {
        total_tokens: split.train_tokens()
            + split.domain_val.total_tokens()
            + split.general_val.total_tokens(),
        num_sequences: split.train.iter().map(TokenShard::num_sequences).sum::<u64>()
            + split.domain_val.num_sequences()
            + split.general_val.num_sequences(),
        seq_len: config.seq_len,
        vocab_size: tokenizer.vocab_size(),
        tokenizer_fingerprint: tokenizer.fingerprint().to_string(),
        source_hash: sha256_file(&src)?,
        validation_sampling: format!("uniform-rows,seed={}", config.stage_seed("pack")),
    };
    let manifest_path = dir.join("manifest.kv");
    manifest.write(&manifest_path)?;

    let mut kv = KvFile::new();
    kv.set("rows", stats.rows)
        .set("packed_tokens", stats.packed_tokens)
        .set("dropped_tail", stats.dropped_tail)
        .set("budget_halted", stats.budget_halted)
        .set("train_tokens", split.train_tokens())
        .set("domain_val_tokens", split.domain_val.total_tokens())
        .set("general_val_tokens", split.general_val.total_tokens());
    let kv_path = dir.join("pack.kv");
    kv.write(&kv_path)?;

    outputs.extend([domain_val_path, general_val_path, vocab_path, manifest_path, kv_path]);
    Ok(outputs)
}

fn read_train_shards(pack_dir: &Path) -> Result<Vec<TokenShard>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(pack_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("train-") && n.ends_with(".shard"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no train-*.shard files in {}", pack_dir.display());
    }
    paths
        .iter()
        .map(|p| TokenShard::read(p).map_err(Into::into))
        .collect()
}

fn interpolation_weights(order: usize) -> Vec<f64> {
    match order {
        1 => vec![1.0],
        2 => vec![0.4, 0.6],
        _ => vec![0.2, 0.3, 0.5],
    }
}

pub fn model_labels(config: &RunConfig) -> Vec<String> {
    config
        .learner_orders
        .iter()
        .map(|o| format!("order-{o}"))
        .collect()
}

fn stage_train(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let pack_dir = config.stage_dir("pack");
    let train = read_train_shards(&pack_dir)?;
    let domain_val = TokenShard::read(&pack_dir.join("domain_val.shard"))?;
    let general_val = TokenShard::read(&pack_dir.join("general_val.shard"))?;
    let manifest = ShardManifest::read(&pack_dir.join("manifest.kv"))?;
    let schedule = config.schedule.resolve(config.token_budget)?;
    let separator = match config.tokenizer {
        TokenizerKind::ByteLevel => None,
        _ => Some(SEP_ID),
    };
    let run_id = format!("seed-{}", config.seed);

    let mut outputs = Vec::new();
    for &order in &config.learner_orders {
        let label = format!("order-{order}");
        let mut learner = ReferenceLearner::with_smoothing(
            order,
            manifest.vocab_size,
            config.add_k,
            interpolation_weights(order),
        )?
        .with_separator(separator);
        let (traces, stats) = train_stream_with_stats(
            &mut learner,
            &train,
            &schedule,
            &domain_val,
            &general_val,
            &run_id,
            &label,
        )?;

        let trace_path = dir.join(format!("trace-{label}.csv"));
        write_traces(&trace_path, &traces)?;
        let stats_path = dir.join(format!("stats-{label}.csv"));
        write_checkpoint_stats(&stats_path, &stats, &label)?;
        outputs.extend([trace_path, stats_path]);
    }
    Ok(outputs)
}

fn trace_signal(traces: &[LossTrace], signal: Signal, path: &Path) -> Result<LossTrace> {
    traces
        .iter()
        .find(|t| t.signal == signal)
        .cloned()
        .with_context(|| format!("{} has no {signal} trace", path.display()))
}

fn stage_analyze(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let train_dir = config.stage_dir("train");
    let seed = config.stage_seed("analyze");

    let mut fits: Vec<FitSummary> = Vec::new();
    let mut frontier_points: Vec<FrontierPoint> = Vec::new();
    let mut summary = KvFile::new();
    for label in model_labels(config) {
        let trace_path = train_dir.join(format!("trace-{label}.csv"));
        let traces = read_traces(&trace_path)
            .with_context(|| format!("reading {}", trace_path.display()))?;
        let domain = trace_signal(&traces, Signal::DomainVal, &trace_path)?;
        let general = trace_signal(&traces, Signal::GeneralVal, &trace_path)?;

        let pure = fit_power_law(&domain)?;
        let interval = bootstrap_exponent(&domain, config.bootstrap_draws, derive_seed(seed, &label))?;
        fits.push(FitSummary {
            model_label: label.clone(),
            signal: Signal::DomainVal,
            fit: pure,
            exponent_interval: Some(interval),
        });
        // When the best offset is zero the saturating form collapses to the
        // pure law and would only duplicate the row above.
        let saturating = fit_saturating_power_law(&domain)?;
        if saturating.form == FitForm::Saturating {
            fits.push(FitSummary {
                model_label: label.clone(),
                signal: Signal::DomainVal,
                fit: saturating,
                exponent_interval: None,
            });
        }
        fits.push(FitSummary {
            model_label: label.clone(),
            signal: Signal::GeneralVal,
            fit: fit_power_law(&general)?,
            exponent_interval: None,
        });

        frontier_points.extend(frontier(&domain, &general)?);

        let gains = marginal_gain(&domain)?;
        summary.set(
            &format!("gains.{label}"),
            gains
                .intervals
                .iter()
                .map(|g| g.gain.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        summary.set(
            &format!("knee.{label}"),
            gains
                .knee
                .map(|i| i.to_string())
                .unwrap_or_else(|| "none".into()),
        );
        let drift = drift_check(&general, config.tau);
        summary
            .set(&format!("drift.{label}.max_abs_delta"), drift.max_abs_delta)
            .set(&format!("drift.{label}.tau"), drift.tau)
            .set(&format!("drift.{label}.stable"), drift.stable);
    }

    let estimates: Vec<TokenEstimate> = config
        .extrapolation_params
        .iter()
        .map(|&params| {
            extrapolate_tokens(
                params,
                config.baseline_params,
                config.baseline_tokens,
                config.gamma,
                config.band_factor,
            )
        })
        .collect();

    let fits_path = dir.join("fits.csv");
    write_fit_summaries(&fits_path, &fits)?;
    let frontier_path = dir.join("frontier.csv");
    write_frontier_csv(&frontier_path, &frontier_points)?;
    let estimates_path = dir.join("estimates.csv");
    write_estimates_csv(&estimates_path, &estimates)?;
    let summary_path = dir.join("summary.kv");
    summary.write(&summary_path)?;
    Ok(vec![fits_path, frontier_path, estimates_path, summary_path])
}

fn stage_report(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let report = RunReport::load(config)?;

    let report_path = dir.join("report.txt");
    std::fs::write(&report_path, report.render())?;

    let table_path = dir.join("table1.txt");
    std::fs::write(&table_path, render_table1(&report.estimates))?;
    let table_csv_path = dir.join("table1.csv");
    write_estimates_csv(&table_csv_path, &report.estimates)?;

    let plots_dir = dir.join("plots");
    std::fs::create_dir_all(&plots_dir)?;
    let mut outputs = plot::emit_plots(&report, &plots_dir, config.emit_timestamp)?;

    outputs.extend([report_path, table_path, table_csv_path]);
    Ok(outputs)
}
