//! Stage orchestration over a small generated corpus: partial runs, resume
//! markers, selective invalidation after edits, and config rejection.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use finscale_cli::fixtures::{self, FixtureSpec};
use finscale_cli::pipeline::{run_through, StageOutcome};
use finscale_cli::RunConfig;

fn smoke_config(dir: &Path, seed: u64) -> RunConfig {
    let conf = fixtures::generate(dir, &FixtureSpec::smoke(seed)).unwrap();
    RunConfig::from_file(&conf).unwrap()
}

fn by_stage(outcomes: &[StageOutcome]) -> HashMap<&'static str, bool> {
    outcomes.iter().map(|o| (o.stage, o.skipped)).collect()
}

#[test]
fn run_stops_at_the_requested_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let config = smoke_config(tmp.path(), 11);

    let outcomes = run_through(&config, "extract").unwrap();
    let stages: Vec<&str> = outcomes.iter().map(|o| o.stage).collect();
    assert_eq!(stages, vec!["fetch", "extract"]);
    assert!(outcomes.iter().all(|o| !o.skipped));
    assert!(config.stage_dir("extract").join("sections.jsonl").is_file());
    assert!(!config.stage_dir("dedup").exists());
}

#[test]
fn completed_stages_are_skipped_and_report_always_rerenders() {
    let tmp = tempfile::tempdir().unwrap();
    let config = smoke_config(tmp.path(), 12);

    run_through(&config, "report").unwrap();
    let second = by_stage(&run_through(&config, "report").unwrap());
    for (stage, skipped) in second {
        if stage == "report" {
            assert!(!skipped, "report must rerender on every run");
        } else {
            assert!(skipped, "{stage} reran without cause");
        }
    }
}

#[test]
fn deleting_an_intermediate_stage_reruns_only_it_and_downstream() {
    let tmp = tempfile::tempdir().unwrap();
    let config = smoke_config(tmp.path(), 13);

    run_through(&config, "report").unwrap();
    fs::remove_dir_all(config.stage_dir("analyze")).unwrap();
    let outcomes = by_stage(&run_through(&config, "report").unwrap());
    for stage in ["fetch", "extract", "dedup", "pack", "train"] {
        assert!(outcomes[stage], "{stage} must stay cached");
    }
    assert!(!outcomes["analyze"], "analyze must be recomputed");
    assert!(!outcomes["report"]);
}

#[test]
fn an_analysis_only_setting_change_leaves_upstream_markers_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = smoke_config(tmp.path(), 14);

    run_through(&config, "report").unwrap();
    config.set("tau", "0.5").unwrap();
    let outcomes = by_stage(&run_through(&config, "report").unwrap());
    for stage in ["fetch", "extract", "dedup", "pack", "train"] {
        assert!(outcomes[stage], "{stage} does not depend on tau");
    }
    assert!(!outcomes["analyze"], "analyze must pick up the new tau");

    let summary = finscale_core::kv::KvFile::read(&config.stage_dir("analyze").join("summary.kv")).unwrap();
    let tau: f64 = summary.get_parsed("drift.order-2.tau").unwrap();
    assert_eq!(tau, 0.5);
}

#[test]
fn invalid_band_geometry_is_rejected_before_any_stage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = smoke_config(tmp.path(), 15);
    config.set("bands", "7").unwrap();

    let err = run_through(&config, "report").unwrap_err().to_string();
    for field in ["bands (7)", "rows", "num_permutations"] {
        assert!(err.contains(field), "error omits {field}: {err}");
    }
    assert!(
        !config.stage_dir("fetch").exists(),
        "no stage may run on a rejected config"
    );
}
