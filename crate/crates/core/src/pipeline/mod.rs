//! End-to-end run: seeds → templates → crossover → K exploration rounds →
//! phase-2 samples (SQL, schema, question, validation) → emission and stats.
//! Resumable from the ledger in the output directory.

mod config;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dataset::{
    compute_stats, emit_dataset, emit_instructions, load_seed, AugmentedSample, DatasetError, RunStats, SeedSample,
};
use crate::foundry::{DomainRegistry, DomainSource, Foundry, FoundryError, Rejection};
use crate::gateway::{GatewayError, LlmGateway};
use crate::ledger::{read_ledger, Ledger, LedgerError, LedgerRecord, Outcome, Phase, Step};
use crate::schema::{generate_schema, SchemaGenError};
use crate::template::{enrich_pool, templatize, CrossoverStats, Template, TemplatePool};
use crate::validator::{validate_sample, ValidationReport, ValidatorError};

pub use config::{BackendKind, ConfigError, PipelineConfig, SeedConfig};

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const TEMPLATES_FILE: &str = "templates.jsonl";
pub const DOMAINS_FILE: &str = "domains.jsonl";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const INSTRUCTIONS_FILE: &str = "dataset.txt";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("loading seed {path}: {source}")]
    Seed { path: String, source: DatasetError },
    #[error("seed corpora yielded no templates")]
    NoTemplates,
    #[error("no domains available for generation")]
    NoDomains,
    #[error("{stage}: {source}")]
    Gateway { stage: &'static str, source: GatewayError },
    #[error("exploration stalled: {accepted} accepted, {failed} failed rounds")]
    ExplorationStalled { accepted: u32, failed: u32 },
    #[error("{stage}: {source}")]
    Io { stage: &'static str, source: std::io::Error },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("writing dataset: {0}")]
    Emit(DatasetError),
    #[error(transparent)]
    Validator(#[from] ValidatorError),
    #[error("resume state: {0}")]
    Resume(String),
}

fn io(stage: &'static str) -> impl FnOnce(std::io::Error) -> PipelineError {
    move |source| PipelineError::Io { stage, source }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stops after this many phase-2 samples finish in this invocation,
    /// leaving the run resumable. Used to exercise resumption.
    pub stop_after_samples: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub stats: RunStats,
    pub crossover: CrossoverStats,
    pub seed_skipped: usize,
    pub templates: usize,
}

pub fn load_seeds(cfg: &PipelineConfig) -> Result<(Vec<SeedSample>, usize), PipelineError> {
    let mut samples = Vec::new();
    let mut skipped = 0;
    for s in &cfg.seeds {
        let load = load_seed(&s.path, s.format)
            .map_err(|source| PipelineError::Seed { path: s.path.display().to_string(), source })?;
        skipped += load.skipped.len();
        samples.extend(load.samples);
    }
    Ok((samples, skipped))
}

/// Deduplicated seed templates grown by crossover.
pub fn build_pool(seeds: &[SeedSample], multiplier: f64, rng_seed: u64) -> (TemplatePool, CrossoverStats) {
    let mut pool = TemplatePool::new();
    for s in seeds {
        pool.insert(templatize(&s.sql));
    }
    let stats = if multiplier > 1.0 { enrich_pool(&mut pool, multiplier, rng_seed) } else { CrossoverStats::default() };
    (pool, stats)
}

fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

fn round_domain_count(cfg: &PipelineConfig, round: u32) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x6578_706c ^ (u64::from(round) << 20));
    cfg.domain_counts[rng.gen_range(0..cfg.domain_counts.len())]
}

pub fn run_pipeline(cfg: &PipelineConfig, gateway: &LlmGateway) -> Result<RunReport, PipelineError> {
    run_pipeline_with(cfg, gateway, RunOptions::default())
}

pub fn run_pipeline_with(
    cfg: &PipelineConfig,
    gateway: &LlmGateway,
    opts: RunOptions,
) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(io("creating output directory"))?;

    let (seeds, seed_skipped) = load_seeds(cfg)?;
    let (pool, crossover) = build_pool(&seeds, cfg.crossover_multiplier, cfg.rng_seed);
    if pool.is_empty() {
        return Err(PipelineError::NoTemplates);
    }
    tracing::info!(
        templates = pool.len(),
        novel = crossover.novel,
        discarded = crossover.discarded,
        "template pool ready"
    );
    let mut w = BufWriter::new(File::create(out.join(TEMPLATES_FILE)).map_err(io("writing templates"))?);
    pool.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(io("writing templates"))?;

    let seed_domains: Vec<&str> = seeds.iter().map(|s| s.domain.as_str()).collect();
    let mut registry = DomainRegistry::from_seed(&seed_domains);
    let ledger_path = out.join(LEDGER_FILE);
    let history = read_ledger(&ledger_path)?;
    let ledger = Ledger::open(&ledger_path)?;

    explore_phase(cfg, gateway, &pool, &mut registry, &history, &ledger)?;
    let mut w = BufWriter::new(File::create(out.join(DOMAINS_FILE)).map_err(io("writing domains"))?);
    registry.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(io("writing domains"))?;

    let status = generate_phase(cfg, gateway, &pool, &registry, &history, &ledger, opts)?;
    let (samples, reports) = checkpoint_state(out)?;
    let records = read_ledger(&ledger_path)?;
    let stats = compute_stats(&records, &reports);
    if status == RunStatus::Complete {
        emit_dataset(&samples, &out.join(DATASET_FILE)).map_err(PipelineError::Emit)?;
        emit_instructions(&samples, &out.join(INSTRUCTIONS_FILE)).map_err(PipelineError::Emit)?;
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
        std::fs::write(out.join(STATS_FILE), json).map_err(io("writing stats"))?;
    }
    Ok(RunReport { status, stats, crossover, seed_skipped, templates: pool.len() })
}

fn explore_phase(
    cfg: &PipelineConfig,
    gateway: &LlmGateway,
    pool: &TemplatePool,
    registry: &mut DomainRegistry,
    history: &[LedgerRecord],
    ledger: &Ledger,
) -> Result<(), PipelineError> {
    let mut round = 0u32;
    let mut accepted = 0u32;
    for r in history.iter().filter(|r| r.phase == Phase::Explore && r.is_terminal()) {
        round += 1;
        if r.outcome == Outcome::Accept {
            registry
                .insert(&r.domain, DomainSource::Explored, r.round)
                .map_err(|e| PipelineError::Resume(format!("ledger round {}: {e}", r.round)))?;
            accepted += 1;
        }
    }
    let order = shuffled(pool.as_slice(), cfg.rng_seed ^ 0x72_6f75_6e64);
    let foundry = Foundry::new(gateway).with_budget(cfg.retry_budget);
    while accepted < cfg.exploration_rounds {
        let failed = round - accepted;
        if failed >= cfg.max_failed_rounds() {
            return Err(PipelineError::ExplorationStalled { accepted, failed });
        }
        let t = &order[round as usize % order.len()];
        let count = round_domain_count(cfg, round);
        let base = LedgerRecord {
            phase: Phase::Explore,
            round,
            sample_id: format!("r{round:06}"),
            step: Step::Explore,
            template_id: t.id.clone(),
            domain: String::new(),
            outcome: Outcome::Retry,
            reason: None,
            detail: None,
            llm_calls: 0,
        };
        let mut records = Vec::new();
        match foundry.explore_domain(registry, t, count, round) {
            Ok(res) => {
                records.extend(retries(&base, &res.rejections));
                let calls = res.rejections.len() as u32 + 1;
                records.push(LedgerRecord {
                    domain: res.domain_name,
                    outcome: Outcome::Accept,
                    llm_calls: calls,
                    ..base
                });
                accepted += 1;
            }
            Err(FoundryError::Gateway(source)) => return Err(PipelineError::Gateway { stage: "exploration", source }),
            Err(e) => {
                let rejections = e.rejections();
                records.extend(retries(&base, rejections));
                records.push(terminal_reject(&base, rejections.last(), rejections.len() as u32, &e.to_string()));
            }
        }
        ledger.append(&records)?;
        round += 1;
    }
    tracing::info!(rounds = round, accepted, domains = registry.len(), "exploration finished");
    Ok(())
}

fn retries<'a>(base: &'a LedgerRecord, rejections: &'a [Rejection]) -> impl Iterator<Item = LedgerRecord> + 'a {
    rejections.iter().map(move |r| LedgerRecord {
        reason: Some(r.code().to_string()),
        detail: Some(r.detail().to_string()),
        ..base.clone()
    })
}

fn terminal_reject(base: &LedgerRecord, last: Option<&Rejection>, calls: u32, detail: &str) -> LedgerRecord {
    LedgerRecord {
        outcome: Outcome::Reject,
        reason: Some(last.map_or("failed", Rejection::code).to_string()),
        detail: Some(detail.to_string()),
        llm_calls: calls,
        ..base.clone()
    }
}

struct SampleResult {
    records: Vec<LedgerRecord>,
    sample: Option<AugmentedSample>,
    report: Option<ValidationReport>,
}

#[allow(clippy::too_many_arguments)]
fn generate_phase(
    cfg: &PipelineConfig,
    gateway: &LlmGateway,
    pool: &TemplatePool,
    registry: &DomainRegistry,
    history: &[LedgerRecord],
    ledger: &Ledger,
    opts: RunOptions,
) -> Result<RunStatus, PipelineError> {
    let out = &cfg.out_dir;
    let done: Vec<&LedgerRecord> = history.iter().filter(|r| r.phase == Phase::Generate && r.is_terminal()).collect();
    let completed: BTreeSet<String> = done.iter().map(|r| r.sample_id.clone()).collect();
    trim_checkpoint::<AugmentedSample>(&out.join(SAMPLES_FILE), &completed, |s| &s.id)?;
    trim_checkpoint::<ValidationReport>(&out.join(REPORTS_FILE), &completed, |r| &r.sample_id)?;
    if cfg.target_samples == 0 {
        return Ok(RunStatus::Complete);
    }
    let mut accepted = done.iter().filter(|r| r.outcome == Outcome::Accept).count() as u32;
    let mut next = done.len();
    let mut domains: Vec<String> = registry.explored().map(|e| e.name.clone()).collect();
    if domains.is_empty() {
        domains = registry.names().into_iter().map(str::to_string).collect();
    }
    if domains.is_empty() {
        return Err(PipelineError::NoDomains);
    }
    let templates = shuffled(pool.as_slice(), cfg.rng_seed ^ 0x6765_6e65);
    let pairs = templates.len() * domains.len();
    let mut finished_here = 0u32;
    loop {
        let remaining = cfg.target_samples.saturating_sub(accepted) as usize;
        let attempts_left = (cfg.max_sample_attempts() as usize).saturating_sub(next);
        let wave = remaining.min(cfg.workers).min(attempts_left).min(pairs.saturating_sub(next));
        if wave == 0 {
            if remaining > 0 {
                tracing::warn!(accepted, target = cfg.target_samples, "stopping phase 2 short of target");
            }
            return Ok(RunStatus::Complete);
        }
        let jobs: Vec<(String, &Template, &str)> = (next..next + wave)
            .map(|i| {
                let t = &templates[i % templates.len()];
                let d = &domains[(i / templates.len() + i % templates.len()) % domains.len()];
                (format!("s{i:06}"), t, d.as_str())
            })
            .collect();
        let results: Vec<Result<SampleResult, PipelineError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(id, t, d)| scope.spawn(move || produce_sample(cfg, gateway, registry, id, t, d)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("sample worker panicked")).collect()
        });
        let mut wave_records = Vec::new();
        let mut wave_samples = Vec::new();
        let mut wave_reports = Vec::new();
        for r in results {
            let r = r?;
            wave_records.extend(r.records);
            wave_samples.extend(r.sample);
            wave_reports.extend(r.report);
        }
        accepted += wave_samples.len() as u32;
        append_jsonl(&out.join(SAMPLES_FILE), &wave_samples)?;
        append_jsonl(&out.join(REPORTS_FILE), &wave_reports)?;
        ledger.append(&wave_records)?;
        next += wave;
        finished_here += wave as u32;
        if opts.stop_after_samples.is_some_and(|n| finished_here >= n) {
            return Ok(RunStatus::Interrupted);
        }
    }
}

fn produce_sample(
    cfg: &PipelineConfig,
    gateway: &LlmGateway,
    registry: &DomainRegistry,
    id: &str,
    t: &Template,
    domain: &str,
) -> Result<SampleResult, PipelineError> {
    let foundry = Foundry::new(gateway).with_budget(cfg.retry_budget).with_scope(id);
    let base = LedgerRecord {
        phase: Phase::Generate,
        round: 0,
        sample_id: id.to_string(),
        step: Step::Sql,
        template_id: t.id.clone(),
        domain: domain.to_string(),
        outcome: Outcome::Retry,
        reason: None,
        detail: None,
        llm_calls: 0,
    };
    let mut records = Vec::new();
    let mut calls = 0u32;
    let done = |mut records: Vec<LedgerRecord>, reason: &str, detail: String, calls: u32| {
        records.push(LedgerRecord {
            step: Step::Sample,
            outcome: Outcome::Reject,
            reason: Some(reason.to_string()),
            detail: Some(detail),
            llm_calls: calls,
            ..base.clone()
        });
        Ok(SampleResult { records, sample: None, report: None })
    };

    let sql = match foundry.generate_domain_sql(registry, domain, t) {
        Ok(g) => {
            calls += g.rejections.len() as u32 + 1;
            records.extend(retries(&base, &g.rejections));
            g.value
        }
        Err(FoundryError::Gateway(source)) => return Err(PipelineError::Gateway { stage: "sql generation", source }),
        Err(e) => {
            let rej = e.rejections();
            records.extend(retries(&base, rej));
            let code = rej.last().map_or("failed", Rejection::code);
            return done(records, code, format!("sql: {e}"), calls + rej.len() as u32);
        }
    };

    let schema_base = LedgerRecord { step: Step::Schema, ..base.clone() };
    let schema = match generate_schema(domain, &sql, gateway, cfg.retry_budget, Some(id)) {
        Ok((schema, attempts)) => {
            calls += attempts.len() as u32 + 1;
            records.extend(attempts.iter().map(|a| LedgerRecord {
                reason: Some(a.code().to_string()),
                detail: Some(a.detail()),
                ..schema_base.clone()
            }));
            schema
        }
        Err(SchemaGenError::Gateway(source)) => {
            return Err(PipelineError::Gateway { stage: "schema generation", source })
        }
        Err(SchemaGenError::SchemaGenerationFailed { attempts, .. }) => {
            calls += attempts.len() as u32;
            records.extend(attempts.iter().map(|a| LedgerRecord {
                reason: Some(a.code().to_string()),
                detail: Some(a.detail()),
                ..schema_base.clone()
            }));
            let code = attempts.last().map_or("failed", |a| a.code());
            return done(records, code, format!("schema: budget of {} exhausted", cfg.retry_budget), calls);
        }
        Err(e @ SchemaGenError::EmptyDomain) => return done(records, "empty", format!("schema: {e}"), calls),
    };

    let translate_base = LedgerRecord { step: Step::Translate, ..base.clone() };
    let question = match foundry.reverse_translate(&sql, &schema) {
        Ok(g) => {
            calls += g.rejections.len() as u32 + 1;
            records.extend(retries(&translate_base, &g.rejections));
            g.value
        }
        Err(FoundryError::Gateway(source)) => {
            return Err(PipelineError::Gateway { stage: "reverse translation", source })
        }
        Err(e) => {
            let rej = e.rejections();
            records.extend(retries(&translate_base, rej));
            let code = rej.last().map_or("failed", Rejection::code);
            return done(records, code, format!("translate: {e}"), calls + rej.len() as u32);
        }
    };

    let mut sample = AugmentedSample {
        id: id.to_string(),
        question,
        schema,
        sql: crate::ast::render_sql(&sql),
        domain: domain.to_string(),
        template_id: t.id.clone(),
        round: 0,
        validation: None,
    };
    let report = validate_sample(&sample, t)?;
    if !report.passed() {
        let code = report.reason_code().unwrap_or("failed");
        let detail = format!("validate: {}", report.detail.clone().unwrap_or_default());
        let mut r = done(records, code, detail, calls)?;
        r.report = Some(report);
        return Ok(r);
    }
    sample.validation = Some(report.clone());
    records.push(LedgerRecord { step: Step::Sample, outcome: Outcome::Accept, llm_calls: calls, ..base });
    Ok(SampleResult { records, sample: Some(sample), report: Some(report) })
}

fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io("writing checkpoint"))?;
    let mut w = BufWriter::new(f);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io("writing checkpoint")(e.into()))?;
        w.write_all(b"\n").map_err(io("writing checkpoint"))?;
    }
    w.flush().map_err(io("writing checkpoint"))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path).map_err(io("reading checkpoint"))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io("reading checkpoint"))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| PipelineError::Resume(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Rewrites a checkpoint keeping only entries of samples the ledger marks
/// finished, first occurrence wins.
fn trim_checkpoint<T: Serialize + DeserializeOwned>(
    path: &Path,
    completed: &BTreeSet<String>,
    id: impl Fn(&T) -> &String,
) -> Result<(), PipelineError> {
    if !path.exists() {
        return Ok(());
    }
    let mut seen = BTreeSet::new();
    let kept: Vec<T> = read_jsonl::<T>(path)?
        .into_iter()
        .filter(|x| completed.contains(id(x)) && seen.insert(id(x).clone()))
        .collect();
    std::fs::remove_file(path).map_err(io("trimming checkpoint"))?;
    append_jsonl(path, &kept)
}

/// Accepted samples and validation reports recorded so far.
pub fn checkpoint_state(out: &Path) -> Result<(Vec<AugmentedSample>, Vec<ValidationReport>), PipelineError> {
    Ok((read_jsonl(&out.join(SAMPLES_FILE))?, read_jsonl(&out.join(REPORTS_FILE))?))
}

pub fn output_path(cfg: &PipelineConfig, file: &str) -> PathBuf {
    cfg.out_dir.join(file)
}
