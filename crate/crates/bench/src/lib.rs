//! Deterministic synthetic inputs for the benchmark targets, sized so one
//! iteration stays inside the code path being measured.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finscale_core::edgar::FormType;
use finscale_core::extract::{ItemLabel, SectionRecord};
use finscale_core::trainer::{LossTrace, Signal, TracePoint};

/// Packed rows of ids drawn uniformly from `[2, vocab)`, leaving 0 for the
/// separator and 1 for the unknown token.
pub fn synthetic_rows(rows: usize, seq_len: usize, vocab: u32, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..seq_len).map(|_| rng.gen_range(2..vocab)).collect())
        .collect()
}

/// Section records over a shared word pool; every tenth document repeats the
/// previous one with a short suffix so a dedup sweep takes both branches.
pub fn synthetic_records(docs: usize, words_each: usize, seed: u64) -> Vec<SectionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records: Vec<SectionRecord> = Vec::with_capacity(docs);
    for d in 0..docs {
        let text = if d % 10 == 9 && d > 0 {
            format!("{} appended closing remark", records[d - 1].text)
        } else {
            (0..words_each)
                .map(|_| format!("word{}", rng.gen_range(0..500)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        records.push(SectionRecord {
            cik: "0000001111".to_string(),
            accession: format!("0000001111-24-{d:06}"),
            form: FormType::Form10K,
            date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(d as u64),
            item_label: ItemLabel::Mda,
            text,
        });
    }
    records
}

/// A noiseless power-law loss trace with geometrically doubling token counts.
pub fn power_law_trace(points: usize, a: f64, b: f64) -> LossTrace {
    LossTrace {
        run_id: "bench".to_string(),
        signal: Signal::DomainVal,
        model_label: "bench".to_string(),
        points: (0..points)
            .map(|i| {
                let tokens = 1_000_000u64 << i;
                TracePoint {
                    tokens_seen: tokens,
                    loss: a * (tokens as f64).powf(b),
                }
            })
            .collect(),
    }
}
