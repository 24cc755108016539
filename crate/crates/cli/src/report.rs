//! Run report assembly and the token-requirement table.
//!
//! Every number in the rendered report is read back from a stage artifact
//! file, so the report can be regenerated from a finished output directory
//! alone and cross-checked against the raw CSVs.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use finscale_core::analysis::{
    marginal_gain, read_estimates_csv, read_fit_summaries, read_frontier_csv, DriftVerdict,
    FitForm, FitSummary, FrontierPoint, MarginalGains, TokenEstimate,
};
use finscale_core::dedup::DedupReport;
use finscale_core::kv::KvFile;
use finscale_core::pack::ShardManifest;
use finscale_core::trainer::{
    read_checkpoint_stats, read_traces, EvalStats, LossTrace, Signal,
};

use crate::config::RunConfig;
use crate::pipeline::model_labels;

#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub companies: usize,
    pub filings_fetched: usize,
    pub kept_filings: usize,
    pub discarded_filings: usize,
    pub sections: usize,
    pub dedup_input_docs: usize,
    pub dedup_removed_docs: usize,
    pub dedup_removal_fraction: f64,
    pub train_tokens: u64,
    pub domain_val_tokens: u64,
    pub general_val_tokens: u64,
    pub dropped_tail: u64,
    pub seq_len: u32,
    pub vocab_size: u32,
    pub tokenizer_fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct ModelReport {
    pub label: String,
    pub train_trace: LossTrace,
    pub domain_trace: LossTrace,
    pub general_trace: LossTrace,
    pub domain_stats: Vec<(u64, EvalStats)>,
    pub general_stats: Vec<(u64, EvalStats)>,
    /// Pure power law on the domain signal, with its bootstrap interval.
    pub domain_fit: FitSummary,
    /// Absent when the best offset was zero and the saturating form
    /// collapsed into the pure law.
    pub saturating_fit: Option<FitSummary>,
    pub general_fit: FitSummary,
    pub gains: MarginalGains,
    pub drift: DriftVerdict,
    pub frontier: Vec<FrontierPoint>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub corpus: CorpusReport,
    pub models: Vec<ModelReport>,
    pub estimates: Vec<TokenEstimate>,
    pub config_echo: Vec<(String, String)>,
}

fn read_kv(path: &Path) -> Result<KvFile> {
    KvFile::read(path).with_context(|| format!("reading {}", path.display()))
}

fn find_fit(
    fits: &[FitSummary],
    label: &str,
    signal: Signal,
    form: FitForm,
    path: &Path,
) -> Result<FitSummary> {
    fits.iter()
        .find(|f| f.model_label == label && f.signal == signal && f.fit.form == form)
        .cloned()
        .with_context(|| {
            format!(
                "{} has no {} {} fit for {label}",
                path.display(),
                form.as_str(),
                signal
            )
        })
}

impl RunReport {
    /// Assembles the report from the artifacts under `config.out_dir`.
    pub fn load(config: &RunConfig) -> Result<RunReport> {
        let out = &config.out_dir;
        let fetch_kv = read_kv(&out.join("fetch/fetch.kv"))?;
        let extract_kv = read_kv(&out.join("extract/extract.kv"))?;
        let dedup = DedupReport::read(&out.join("dedup/report.kv"))?;
        let manifest = ShardManifest::read(&out.join("pack/manifest.kv"))?;
        let pack_kv = read_kv(&out.join("pack/pack.kv"))?;

        let corpus = CorpusReport {
            companies: fetch_kv.get_parsed("companies")?,
            filings_fetched: fetch_kv.get_parsed("filings")?,
            kept_filings: extract_kv.get_parsed("kept_filings")?,
            discarded_filings: extract_kv.get_parsed("discarded_filings")?,
            sections: extract_kv.get_parsed("sections_emitted")?,
            dedup_input_docs: dedup.input_docs,
            dedup_removed_docs: dedup.removed_docs,
            dedup_removal_fraction: dedup.removal_fraction,
            train_tokens: pack_kv.get_parsed("train_tokens")?,
            domain_val_tokens: pack_kv.get_parsed("domain_val_tokens")?,
            general_val_tokens: pack_kv.get_parsed("general_val_tokens")?,
            dropped_tail: pack_kv.get_parsed("dropped_tail")?,
            seq_len: manifest.seq_len,
            vocab_size: manifest.vocab_size,
            tokenizer_fingerprint: manifest.tokenizer_fingerprint.clone(),
        };

        let fits_path = out.join("analyze/fits.csv");
        let fits = read_fit_summaries(&fits_path)?;
        let frontier_points = read_frontier_csv(&out.join("analyze/frontier.csv"))?;
        let estimates = read_estimates_csv(&out.join("analyze/estimates.csv"))?;
        let summary = read_kv(&out.join("analyze/summary.kv"))?;

        let mut models = Vec::new();
        for label in model_labels(config) {
            let trace_path = out.join(format!("train/trace-{label}.csv"));
            let traces = read_traces(&trace_path)
                .with_context(|| format!("reading {}", trace_path.display()))?;
            let pull = |signal: Signal| -> Result<LossTrace> {
                traces
                    .iter()
                    .find(|t| t.signal == signal)
                    .cloned()
                    .with_context(|| format!("{} has no {signal} trace", trace_path.display()))
            };
            let domain_trace = pull(Signal::DomainVal)?;
            let general_trace = pull(Signal::GeneralVal)?;
            let stats_path = out.join(format!("train/stats-{label}.csv"));

            let drift = DriftVerdict {
                max_abs_delta: summary.get_parsed(&format!("drift.{label}.max_abs_delta"))?,
                tau: summary.get_parsed(&format!("drift.{label}.tau"))?,
                stable: summary.get_parsed(&format!("drift.{label}.stable"))?,
            };

            models.push(ModelReport {
                train_trace: pull(Signal::Train)?,
                domain_stats: read_checkpoint_stats(&stats_path, Signal::DomainVal)?,
                general_stats: read_checkpoint_stats(&stats_path, Signal::GeneralVal)?,
                domain_fit: find_fit(&fits, &label, Signal::DomainVal, FitForm::Pure, &fits_path)?,
                saturating_fit: fits
                    .iter()
                    .find(|f| {
                        f.model_label == label
                            && f.signal == Signal::DomainVal
                            && f.fit.form == FitForm::Saturating
                    })
                    .cloned(),
                general_fit: find_fit(&fits, &label, Signal::GeneralVal, FitForm::Pure, &fits_path)?,
                gains: marginal_gain(&domain_trace)?,
                drift,
                frontier: frontier_points
                    .iter()
                    .filter(|p| p.model_label == label)
                    .cloned()
                    .collect(),
                domain_trace,
                general_trace,
                label,
            });
        }

        let config_echo = config
            .echo_kv()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();

        Ok(RunReport {
            corpus,
            models,
            estimates,
            config_echo,
        })
    }

    /// Plain-text report. Deterministic: no timestamps, every value printed
    /// with the same formatting the stage artifacts use.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "finscale run report (toolkit {})",
            env!("CARGO_PKG_VERSION")
        );

        let c = &self.corpus;
        let _ = writeln!(out, "\n[corpus]");
        let _ = writeln!(out, "companies: {}", c.companies);
        let _ = writeln!(
            out,
            "filings fetched: {} (kept {}, discarded {})",
            c.filings_fetched, c.kept_filings, c.discarded_filings
        );
        let _ = writeln!(out, "sections extracted: {}", c.sections);
        let _ = writeln!(
            out,
            "dedup: removed {} of {} documents (fraction {})",
            c.dedup_removed_docs, c.dedup_input_docs, c.dedup_removal_fraction
        );
        let _ = writeln!(
            out,
            "packed tokens: train {}, domain_val {}, general_val {} (seq_len {}, tail dropped {})",
            c.train_tokens, c.domain_val_tokens, c.general_val_tokens, c.seq_len, c.dropped_tail
        );
        let _ = writeln!(
            out,
            "tokenizer: vocab_size {}, fingerprint {}",
            c.vocab_size, c.tokenizer_fingerprint
        );

        for m in &self.models {
            let _ = writeln!(out, "\n[model {}]", m.label);
            let _ = writeln!(out, "tokens_seen  domain_val (±SE)         general_val (±SE)");
            for ((tokens, d), (_, g)) in m.domain_stats.iter().zip(&m.general_stats) {
                let _ = writeln!(
                    out,
                    "{tokens:>11}  {:.6} (±{:.6})     {:.6} (±{:.6})",
                    d.mean, d.std_err, g.mean, g.std_err
                );
            }

            let fit = &m.domain_fit.fit;
            let _ = write!(
                out,
                "domain power law: L(N) = {}·N^({}), r2 = {}",
                fit.a, fit.b, fit.r2
            );
            if let Some(iv) = &m.domain_fit.exponent_interval {
                let _ = write!(out, ", bootstrap 90% b in [{}, {}]", iv.lo, iv.hi);
            }
            out.push('\n');
            match &m.saturating_fit {
                Some(s) => {
                    let sat = &s.fit;
                    let _ = writeln!(
                        out,
                        "domain saturating fit: L(N) = {} + {}·N^({}), r2 = {}",
                        sat.c.unwrap_or(0.0),
                        sat.a,
                        sat.b,
                        sat.r2
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "domain saturating fit: offset collapsed to zero, pure law stands"
                    );
                }
            }
            let gen = &m.general_fit.fit;
            let _ = writeln!(
                out,
                "general power law: b = {}, r2 = {}",
                gen.b, gen.r2
            );

            let gain_list = m
                .gains
                .intervals
                .iter()
                .map(|g| format!("{:.6}", g.gain))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "marginal gain per doubling: {gain_list}");
            match m.gains.knee {
                Some(i) => {
                    let k = &m.gains.intervals[i];
                    let _ = writeln!(
                        out,
                        "diminishing-returns knee: interval {i} ({} -> {} tokens)",
                        k.from_tokens, k.to_tokens
                    );
                }
                None => {
                    let _ = writeln!(out, "diminishing-returns knee: none");
                }
            }
            let _ = writeln!(
                out,
                "general drift: max |delta| = {}, band tau = {}, verdict: {}",
                m.drift.max_abs_delta,
                m.drift.tau,
                if m.drift.stable { "stable" } else { "unstable" }
            );
            let _ = writeln!(out, "frontier (delta_domain, delta_general):");
            for p in &m.frontier {
                let _ = writeln!(
                    out,
                    "{:>11}  ({:.6}, {:.6})",
                    p.tokens_seen, p.delta_domain, p.delta_general
                );
            }
        }

        let _ = writeln!(out, "\n[token requirements]");
        out.push_str(&render_table1(&self.estimates));

        let _ = writeln!(out, "\n[config]");
        for (k, v) in &self.config_echo {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

const SUPERSCRIPTS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];

fn superscript(exp: i32) -> String {
    let mut s = String::new();
    if exp < 0 {
        s.push('⁻');
    }
    for d in exp.unsigned_abs().to_string().bytes() {
        s.push(SUPERSCRIPTS[(d - b'0') as usize]);
    }
    s
}

fn round_one_sig_fig(v: f64) -> f64 {
    let exp = v.log10().floor();
    let scale = 10f64.powf(exp);
    (v / scale).round() * scale
}

/// Low edges at or above half a billion snap to the nearest power of two in
/// billions, which is the grid scheduled training runs land on; the band is
/// `band_factor` times that edge, rounded up to one significant figure.
fn snap_low(v: f64) -> f64 {
    if v < 5e8 {
        round_one_sig_fig(v)
    } else {
        2f64.powf((v / 1e9).log2().round()) * 1e9
    }
}

fn mantissa_str(m: f64) -> String {
    if (m - m.round()).abs() < 1e-9 {
        format!("{:.0}", m.round())
    } else {
        format!("{m:.1}")
    }
}

fn format_tokens(v: f64) -> String {
    let exp = v.log10().floor() as i32;
    let mantissa = v / 10f64.powi(exp);
    format!("{}×10{}", mantissa_str(mantissa), superscript(exp))
}

fn format_band(low: f64, high: f64) -> String {
    if (high - low).abs() < 1e-6 * low {
        return format_tokens(low);
    }
    let low_snapped = snap_low(low);
    let factor = high / low;
    let high_rounded = round_one_sig_fig(low_snapped * factor);
    // Both edges rendered in the low edge's decade: 8e9 and 2e10 print as
    // 8–20×10⁹, not 8×10⁹–2×10¹⁰.
    let exp = low_snapped.log10().floor() as i32;
    let scale = 10f64.powi(exp);
    format!(
        "{}–{}×10{}",
        mantissa_str(low_snapped / scale),
        mantissa_str(high_rounded / scale),
        superscript(exp)
    )
}

fn format_ratio(ratio: f64) -> String {
    if (ratio - 1.0).abs() < 1e-12 {
        "1×".to_string()
    } else if ratio < 20.0 {
        format!("~{:.1}×", (ratio * 10.0).floor() / 10.0)
    } else {
        format!("~{:.0}×", ratio.floor())
    }
}

fn format_params(param_count: f64) -> String {
    let billions = param_count / 1e9;
    if (billions - billions.round()).abs() < 1e-9 {
        format!("{:.0}B", billions.round())
    } else {
        format!("{billions:.1}B")
    }
}

/// One-significant-figure token requirement table. Ratios are truncated, not
/// rounded, and the baseline row shows the observed budget instead of a band.
/// A full-precision CSV companion is written next to it by the report stage.
pub fn render_table1(estimates: &[TokenEstimate]) -> String {
    let mut rows: Vec<[String; 3]> = vec![[
        "params".to_string(),
        "ratio".to_string(),
        "tokens".to_string(),
    ]];
    for e in estimates {
        let band = if (e.ratio - 1.0).abs() < 1e-12 {
            format!("{} (observed)", format_tokens(e.low))
        } else {
            format_band(e.low, e.high)
        };
        rows.push([format_params(e.param_count), format_ratio(e.ratio), band]);
    }

    let width = |col: usize| {
        rows.iter()
            .map(|r| r[col].chars().count())
            .max()
            .unwrap_or(0)
    };
    let (w0, w1) = (width(0), width(1));
    let mut out = String::new();
    for row in &rows {
        let pad = |s: &str, w: usize| {
            let mut padded = s.to_string();
            for _ in s.chars().count()..w {
                padded.push(' ');
            }
            padded
        };
        let _ = writeln!(out, "{}  {}  {}", pad(&row[0], w0), pad(&row[1], w1), row[2]);
    }
    out
}
