use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;

use sqlforge_core::dataset::{load_dataset, AugmentedSample};
use sqlforge_core::gateway::{Backend, GatewayConfig, LlmGateway, ReplayBackend, SimulatedBackend};
use sqlforge_core::pipeline::{
    checkpoint_state, run_pipeline, run_pipeline_with, PipelineConfig, RunOptions, RunStatus,
};
use sqlforge_core::template::TemplatePool;
use sqlforge_core::validator::validate_sample;

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden")
}

fn config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_file(&golden().join("run.toml")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn gateway(backend: impl Backend + 'static) -> LlmGateway {
    LlmGateway::new(Arc::new(backend), GatewayConfig::default()).unwrap()
}

fn replay() -> LlmGateway {
    gateway(ReplayBackend::load(&golden().join("exchanges.jsonl")).unwrap())
}

/// Rewrites the golden exchange log and expected outputs from the simulated backend.
#[test]
#[ignore]
fn record_golden() {
    let dir = tempfile::tempdir().unwrap();
    let log = golden().join("exchanges.jsonl");
    let _ = std::fs::remove_file(&log);
    let gw = gateway(SimulatedBackend::new()).with_exchange_log(&log).unwrap();
    let report = run_pipeline(&config(dir.path()), &gw).unwrap();
    assert_eq!(report.status, RunStatus::Complete);
    let expected = golden().join("expected");
    std::fs::create_dir_all(&expected).unwrap();
    for f in ["dataset.jsonl", "dataset.txt", "stats.json", "ledger.jsonl"] {
        std::fs::copy(dir.path().join(f), expected.join(f)).unwrap();
    }
    println!("{:#?}", report.stats);
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn golden_replay_reproduces_expected_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&config(dir.path()), &replay()).unwrap();
    assert_eq!(report.status, RunStatus::Complete);
    assert_eq!(report.seed_skipped, 6);
    let expected = golden().join("expected");
    for f in ["dataset.jsonl", "dataset.txt", "stats.json", "ledger.jsonl"] {
        assert_eq!(read(dir.path(), f), read(&expected, f), "{f}");
    }
}

#[test]
fn golden_dataset_passes_every_stage_again() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path()), &replay()).unwrap();
    let records = load_dataset(&dir.path().join("dataset.jsonl")).unwrap();
    assert_eq!(records.len(), 20);
    let pool = TemplatePool::read_jsonl(std::io::BufReader::new(
        std::fs::File::open(dir.path().join("templates.jsonl")).unwrap(),
    ))
    .unwrap();
    for (i, r) in records.iter().enumerate() {
        let sample = AugmentedSample {
            id: format!("check{i}"),
            question: r.question.clone(),
            schema: r.schema().unwrap(),
            sql: r.sql.clone(),
            domain: r.domain.clone(),
            template_id: r.template_id.clone(),
            round: 0,
            validation: None,
        };
        let t = pool.get(&r.template_id).expect("template in pool");
        let report = validate_sample(&sample, t).unwrap();
        assert!(report.passed(), "{}: {report:?}", r.sql);
    }
}

/// Recounts the stats file straight from the raw ledger and report lines.
#[test]
fn stats_match_an_independent_recount() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path()), &replay()).unwrap();
    let stats: Value = serde_json::from_str(&read(dir.path(), "stats.json")).unwrap();
    let ledger = jsonl(&read(dir.path(), "ledger.jsonl"));
    let reports = jsonl(&read(dir.path(), "reports.jsonl"));

    let field = |v: &Value, k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").to_string();
    let sample_ends: Vec<&Value> =
        ledger.iter().filter(|r| field(r, "phase") == "generate" && field(r, "step") == "sample").collect();
    let accepted: Vec<&&Value> = sample_ends.iter().filter(|r| field(r, "outcome") == "accept").collect();
    let explore_ends: Vec<&Value> =
        ledger.iter().filter(|r| field(r, "phase") == "explore" && field(r, "outcome") != "retry").collect();
    let mut rejected_by_reason = BTreeMap::new();
    for r in sample_ends.iter().filter(|r| field(r, "outcome") == "reject") {
        *rejected_by_reason.entry(field(r, "reason")).or_insert(0u64) += 1;
    }
    let mut retries = BTreeMap::new();
    for r in ledger.iter().filter(|r| field(r, "outcome") == "retry") {
        *retries.entry(field(r, "reason")).or_insert(0u64) += 1;
    }
    let domains: BTreeSet<String> = accepted.iter().map(|r| field(r, "domain").to_lowercase()).collect();
    let templates: BTreeSet<String> = accepted.iter().map(|r| field(r, "template_id")).collect();
    let executable = reports
        .iter()
        .filter(|r| {
            r["stages"].as_array().unwrap().iter().any(|s| s["stage"] == "executability" && s["passed"] == true)
        })
        .count() as u64;
    let calls = |phase: &str, ends: &[&Value]| -> u64 {
        ends.iter().filter(|r| field(r, "phase") == phase).map(|r| r["llm_calls"].as_u64().unwrap_or(0)).sum()
    };

    assert_eq!(stats["attempted"], sample_ends.len() as u64);
    assert_eq!(stats["accepted"], accepted.len() as u64);
    assert_eq!(stats["rejected"], (sample_ends.len() - accepted.len()) as u64);
    assert_eq!(stats["rejected_by_reason"], serde_json::to_value(&rejected_by_reason).unwrap());
    assert_eq!(stats["retries_by_reason"], serde_json::to_value(&retries).unwrap());
    assert_eq!(
        stats["explorations_accepted"],
        explore_ends.iter().filter(|r| field(r, "outcome") == "accept").count() as u64
    );
    assert_eq!(stats["distinct_domains"], domains.len() as u64);
    assert_eq!(stats["distinct_templates"], templates.len() as u64);
    assert_eq!(stats["executable"], executable);
    assert_eq!(stats["validated"], reports.len() as u64);
    let rate = format!("{:.3}", executable as f64 / reports.len() as f64);
    assert_eq!(stats["executable_rate"], rate);
    assert_eq!(stats["llm_calls"]["explore"], calls("explore", &explore_ends));
    assert_eq!(stats["llm_calls"]["generate"], calls("generate", &sample_ends));
    let exchanges = read(&golden(), "exchanges.jsonl").lines().count() as u64;
    assert_eq!(calls("explore", &explore_ends) + calls("generate", &sample_ends), exchanges);
}

#[test]
fn repeated_runs_are_byte_identical_across_worker_counts() {
    let outputs: Vec<Vec<String>> = [4, 4, 1, 7]
        .into_iter()
        .map(|workers| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = config(dir.path());
            cfg.workers = workers;
            run_pipeline(&cfg, &replay()).unwrap();
            ["dataset.jsonl", "ledger.jsonl", "stats.json"].iter().map(|f| read(dir.path(), f)).collect()
        })
        .collect();
    for o in &outputs[1..] {
        assert_eq!(o, &outputs[0]);
    }
}

#[test]
fn interrupted_run_resumes_to_the_same_outputs() {
    let straight = tempfile::tempdir().unwrap();
    run_pipeline(&config(straight.path()), &replay()).unwrap();

    let resumed = tempfile::tempdir().unwrap();
    let cfg = config(resumed.path());
    let first = run_pipeline_with(&cfg, &replay(), RunOptions { stop_after_samples: Some(5) }).unwrap();
    assert_eq!(first.status, RunStatus::Interrupted);
    assert!(!resumed.path().join("dataset.jsonl").exists());
    let (partial, _) = checkpoint_state(resumed.path()).unwrap();
    assert!(!partial.is_empty() && partial.len() < 20);
    // A sample finished by a worker but not yet in the ledger is redone.
    let stray = std::fs::read_to_string(resumed.path().join("samples.jsonl")).unwrap();
    let extra = stray.lines().last().unwrap().replace("\"id\":\"s", "\"id\":\"x");
    std::fs::write(resumed.path().join("samples.jsonl"), format!("{stray}{extra}\n")).unwrap();

    let second = run_pipeline(&cfg, &replay()).unwrap();
    assert_eq!(second.status, RunStatus::Complete);
    for f in ["dataset.jsonl", "dataset.txt", "ledger.jsonl", "stats.json"] {
        assert_eq!(read(resumed.path(), f), read(straight.path(), f), "{f}");
    }
}

#[test]
fn zero_target_writes_only_exploration() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.target_samples = 0;
    let report = run_pipeline(&cfg, &replay()).unwrap();
    assert_eq!(report.stats.attempted, 0);
    let ledger = jsonl(&read(dir.path(), "ledger.jsonl"));
    assert!(!ledger.is_empty());
    assert!(ledger.iter().all(|r| r["phase"] == "explore"));
    assert_eq!(read(dir.path(), "dataset.jsonl"), "");
}

#[test]
fn exploration_grows_the_registry_before_generation() {
    let recorded = tempfile::tempdir().unwrap();
    let log = recorded.path().join("exchanges.jsonl");
    let mut cfg = config(recorded.path());
    cfg.exploration_rounds = 25;
    cfg.target_samples = 3;
    run_pipeline(&cfg, &gateway(SimulatedBackend::new()).with_exchange_log(&log).unwrap()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    run_pipeline(&cfg, &gateway(ReplayBackend::load(&log).unwrap())).unwrap();

    let seeds = 4;
    let domains = jsonl(&read(dir.path(), "domains.jsonl"));
    let ledger = jsonl(&read(dir.path(), "ledger.jsonl"));
    let accepted = ledger.iter().filter(|r| r["phase"] == "explore" && r["outcome"] == "accept").count();
    assert_eq!(accepted, 25);
    let retried = ledger.iter().filter(|r| r["phase"] == "explore" && r["outcome"] == "retry").count();
    assert!(retried > 0, "replay log should include rejected explorations");
    assert_eq!(domains.len(), seeds + accepted);
    let lowered: BTreeSet<String> = domains.iter().map(|d| d["name"].as_str().unwrap().to_lowercase()).collect();
    assert_eq!(lowered.len(), domains.len());

    let first_generate = ledger.iter().position(|r| r["phase"] == "generate").unwrap();
    let accepted_before = ledger[..first_generate].iter().filter(|r| r["outcome"] == "accept").count();
    assert_eq!(accepted_before, 25);
    assert!(ledger[first_generate..].iter().all(|r| r["phase"] == "generate"));
}
