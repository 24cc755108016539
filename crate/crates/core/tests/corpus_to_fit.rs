//! The library's modules chained end to end through public interfaces only:
//! raw filing markup to section records, near-duplicate removal, token
//! packing with held-out splits, reference-learner training, and the final
//! loss-curve analyses. Checks the contracts at each seam rather than any
//! statistical tolerance.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finscale_core::analysis::{drift_check, fit_power_law, frontier};
use finscale_core::dedup::{dedup_corpus, DedupParams};
use finscale_core::edgar::{DocumentSource, FilingDocument, FilingRef, FormType};
use finscale_core::extract::{extract_whitelist, SectionRecord};
use finscale_core::pack::{
    join_documents, pack, split_validation, Tokenizer, TokenizerKind, TokenizerSpec,
};
use finscale_core::trainer::{train_stream_with_stats, CheckpointSchedule, ReferenceLearner, Signal};

const SEQ_LEN: u32 = 128;
const TRAIN_TOKENS: u64 = 2_048;
const VAL_TOKENS: u64 = 256;

fn filing(index: usize, body: String) -> FilingDocument {
    FilingDocument::new(
        FilingRef {
            cik: "0000055555".to_string(),
            accession_id: format!("0000055555-24-{index:06}"),
            form_type: FormType::Form10K,
            filing_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
                + chrono::Days::new(index as u64),
        },
        body,
        DocumentSource::Local,
    )
    .unwrap()
}

fn prose(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| format!("tok{}", rng.gen_range(0..60)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn filings_flow_through_every_module_to_a_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let mut bodies: Vec<String> = (0..20)
        .map(|_| {
            format!(
                "<p>ITEM 7. MANAGEMENT'S DISCUSSION AND ANALYSIS</p><p>{}</p><p>{}</p>",
                prose(&mut rng, 100),
                prose(&mut rng, 100)
            )
        })
        .collect();
    bodies[7] = bodies[3].clone();

    let mut records: Vec<SectionRecord> = Vec::new();
    for (i, body) in bodies.into_iter().enumerate() {
        let extracted = extract_whitelist(&filing(i, body), 50);
        assert!(!extracted.discarded, "filing {i} lost its section");
        records.extend(extracted.into_records());
    }
    assert_eq!(records.len(), 20);

    let (survivors, dedup_report) = dedup_corpus(&records, &DedupParams::default());
    assert_eq!(dedup_report.removed_docs, 1, "one planted byte-identical repeat");
    assert_eq!(survivors.len(), 19);

    let spec = TokenizerSpec {
        kind: TokenizerKind::Whitespace,
        vocab_size: 2_048,
        vocab_source: None,
    };
    let tokenizer = Tokenizer::build(&spec, survivors.iter().map(|r| r.text.as_str())).unwrap();
    let docs: Vec<Vec<u32>> = survivors
        .iter()
        .map(|r| tokenizer.tokenize(&r.text).unwrap())
        .collect();
    let sep = tokenizer.sep_id().unwrap();
    let (shards, stats) = pack(join_documents(docs, sep), SEQ_LEN, TRAIN_TOKENS + VAL_TOKENS).unwrap();
    assert_eq!(stats.packed_tokens, TRAIN_TOKENS + VAL_TOKENS, "corpus covers the budget");

    // Same vocabulary, fresh draws: rows stay content-distinct, which the
    // disjointness check relies on.
    let general_text = prose(&mut rng, 600);
    let general_ids = tokenizer.tokenize(&general_text).unwrap();
    let split = split_validation(shards, VAL_TOKENS, general_ids, VAL_TOKENS, 5).unwrap();
    assert!(split.is_disjoint());
    assert_eq!(split.train_tokens(), TRAIN_TOKENS);

    let mut learner = ReferenceLearner::with_smoothing(2, tokenizer.vocab_size(), 1e-4, vec![0.4, 0.6])
        .unwrap();
    let schedule = CheckpointSchedule::geometric_doubling(TRAIN_TOKENS).unwrap();
    let ([train, domain, general], checkpoints) = train_stream_with_stats(
        &mut learner,
        &split.train,
        &schedule,
        &split.domain_val,
        &split.general_val,
        "seam",
        "order-2",
    )
    .unwrap();

    assert_eq!(train.signal, Signal::Train);
    assert_eq!(domain.points.len(), schedule.budgets().len());
    assert_eq!(checkpoints.len(), schedule.budgets().len());
    assert!(domain.losses().iter().all(|l| l.is_finite() && *l > 0.0));
    let first = domain.points.first().unwrap().loss;
    let last = domain.points.last().unwrap().loss;
    assert!(last < first, "more training must not hurt in-domain loss ({first} -> {last})");

    let fit = fit_power_law(&domain).unwrap();
    assert!(fit.b < 0.0, "loss curve slopes down, got b = {}", fit.b);
    assert!(fit.r2.is_finite());

    let verdict = drift_check(&general, 0.5);
    assert!(verdict.max_abs_delta.is_finite());

    let points = frontier(&domain, &general).unwrap();
    assert_eq!(points[0].delta_domain, 0.0);
    assert_eq!(points[0].delta_general, 0.0);
    assert_eq!(points.len(), domain.points.len());
}
