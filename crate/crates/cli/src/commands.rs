use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqlforge_core::ast::parse_sql;
use sqlforge_core::dataset::{compute_stats, load_dataset, load_seed, AugmentedSample, DatasetError, SeedFormat};
use sqlforge_core::foundry::{DomainRegistry, Foundry, FoundryError};
use sqlforge_core::gateway::{Backend, GatewayError, HttpBackend, LlmGateway, ReplayBackend, SimulatedBackend};
use sqlforge_core::ledger::read_ledger;
use sqlforge_core::pipeline::{
    checkpoint_state, run_pipeline_with, BackendKind, PipelineConfig, PipelineError, RunOptions, RunStatus,
    LEDGER_FILE, TEMPLATES_FILE,
};
use sqlforge_core::schema::{generate_schema, infer_schema, read_ddl, render_ddl, SchemaGenError};
use sqlforge_core::template::{random_crossovers, templatize, Provenance, Template, TemplatePool};
use sqlforge_core::validator::{executable_rate, validate_sample, ValidationReport};

use crate::{Cli, Command};

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("model backend: {0}")]
    Gateway(String),
    #[error("{0}")]
    Io(String),
    #[error("run state: {0}")]
    State(String),
    #[error("cannot make progress: {0}")]
    Stalled(String),
    #[error("validator: {0}")]
    Engine(String),
    /// Stdout was closed by the reader, as in `sqlforge stats | head`.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Gateway(_) => 5,
            CliError::Io(_) => 6,
            CliError::State(_) => 7,
            CliError::Stalled(_) => 8,
            CliError::Engine(_) => 9,
            CliError::Closed => 0,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Config(_) => CliError::Config(msg),
            PipelineError::Seed { .. } => CliError::Input(msg),
            PipelineError::NoTemplates | PipelineError::NoDomains | PipelineError::ExplorationStalled { .. } => {
                CliError::Stalled(msg)
            }
            PipelineError::Gateway { .. } => CliError::Gateway(msg),
            PipelineError::Io { .. } => CliError::Io(msg),
            PipelineError::Emit(DatasetError::Io(_)) => CliError::Io(msg),
            PipelineError::Ledger(_) | PipelineError::Emit(_) | PipelineError::Resume(_) => CliError::State(msg),
            PipelineError::Validator(_) => CliError::Engine(msg),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) => CliError::Config(e.to_string()),
            GatewayError::Log(_) => CliError::Io(e.to_string()),
            _ => CliError::Gateway(e.to_string()),
        }
    }
}

impl From<FoundryError> for CliError {
    fn from(e: FoundryError) -> Self {
        match e {
            FoundryError::Gateway(g) => g.into(),
            FoundryError::GenerationFailed { .. } | FoundryError::TranslationFailed { .. } => {
                CliError::Stalled(format!("{e}: {}", join_rejections(&e)))
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn write_err(e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        CliError::Closed
    } else {
        CliError::Io(format!("stdout: {e}"))
    }
}

fn join_rejections(e: &FoundryError) -> String {
    e.rejections().iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn io_err(what: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", what.display()))
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Templatize { input } => {
            let pool = load_pool(input, cli.seed_format.unwrap_or(SeedFormat::Spider))?;
            pool.write_jsonl(&mut out).map_err(write_err)?;
        }
        Command::Crossover { input, count } => {
            let pool = load_pool(input, cli.seed_format.unwrap_or(SeedFormat::Spider))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let (children, stats) = random_crossovers(&pool, *count, &mut rng);
            let mut offspring = TemplatePool::new();
            for c in children {
                offspring.insert(c);
            }
            offspring.write_jsonl(&mut out).map_err(write_err)?;
            eprintln!("{}", serde_json::to_string(&stats).expect("stats serialize"));
        }
        Command::Explore => {
            let explore_only = PipelineConfig { target_samples: 0, ..cfg.clone() };
            let gw = gateway(cli, &cfg)?;
            let report = run_pipeline_with(&explore_only, &gw, RunOptions::default())?;
            eprintln!(
                "{} explorations accepted, {} rejected; domains in {}",
                report.stats.explorations_accepted,
                report.stats.explorations_rejected,
                cfg.out_dir.display()
            );
        }
        Command::Generate { domain, template } => {
            let t =
                Template::parse(template, Provenance::Seed).map_err(|e| CliError::Input(format!("template: {e}")))?;
            let registry = DomainRegistry::from_seed(&[domain.as_str()]);
            let gw = gateway(cli, &cfg)?;
            let sql = Foundry::new(&gw).with_budget(cfg.retry_budget).generate_domain_sql(&registry, domain, &t)?;
            writeln!(out, "{}", sqlforge_core::ast::render_sql(&sql.value)).map_err(write_err)?;
        }
        Command::Schema { domain, sql, infer } => {
            let ast = parse_sql(sql).map_err(|e| CliError::Input(format!("sql: {e}")))?;
            let schema = if *infer {
                infer_schema(&ast).map_err(|e| CliError::Input(e.to_string()))?
            } else {
                let domain =
                    domain.as_deref().ok_or_else(|| CliError::Input("--domain is required unless --infer".into()))?;
                let gw = gateway(cli, &cfg)?;
                match generate_schema(domain, &ast, &gw, cfg.retry_budget, None) {
                    Ok((schema, _)) => schema,
                    Err(SchemaGenError::Gateway(e)) => return Err(e.into()),
                    Err(e) => return Err(CliError::Stalled(e.to_string())),
                }
            };
            writeln!(out, "{}", render_ddl(&schema)).map_err(write_err)?;
        }
        Command::Translate { sql, schema } => {
            let ast = parse_sql(sql).map_err(|e| CliError::Input(format!("sql: {e}")))?;
            let ddl = std::fs::read_to_string(schema).map_err(io_err(schema))?;
            let schema = read_ddl(&ddl).map_err(|e| CliError::Input(format!("{}: {e}", schema.display())))?;
            let gw = gateway(cli, &cfg)?;
            let q = Foundry::new(&gw).with_budget(cfg.retry_budget).reverse_translate(&ast, &schema)?;
            writeln!(out, "{}", q.value).map_err(write_err)?;
        }
        Command::Validate { dataset, templates } => {
            let reports = validate_dataset(dataset, templates.as_deref())?;
            for r in &reports {
                writeln!(out, "{}", serde_json::to_string(r).expect("report serializes")).map_err(write_err)?;
            }
            match executable_rate(&reports) {
                Ok(rate) => eprintln!("executable: {}/{} = {rate}", rate.numerator, rate.denominator),
                Err(_) => eprintln!("executable: no samples"),
            }
        }
        Command::Stats { dir } => {
            let dir = dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let ledger_path = dir.join(LEDGER_FILE);
            if !ledger_path.exists() {
                return Err(CliError::Input(format!("no ledger at {}", ledger_path.display())));
            }
            let ledger = read_ledger(&ledger_path).map_err(|e| CliError::State(e.to_string()))?;
            let (_, reports) = checkpoint_state(&dir)?;
            let stats = compute_stats(&ledger, &reports);
            writeln!(out, "{}", serde_json::to_string_pretty(&stats).expect("stats serialize")).map_err(write_err)?;
        }
        Command::Run { stop_after } => {
            if cli.config.is_none() {
                return Err(CliError::Config("run needs --config".into()));
            }
            let gw = gateway(cli, &cfg)?;
            let report = run_pipeline_with(&cfg, &gw, RunOptions { stop_after_samples: *stop_after })?;
            let s = &report.stats;
            match report.status {
                RunStatus::Complete => eprintln!(
                    "{} templates ({} from crossover), {} seed records skipped; {} of {} samples accepted; output in {}",
                    report.templates,
                    report.crossover.novel,
                    report.seed_skipped,
                    s.accepted,
                    s.attempted,
                    cfg.out_dir.display()
                ),
                RunStatus::Interrupted => {
                    eprintln!("stopped after {} samples; run again to resume", s.attempted)
                }
            }
        }
    }
    out.flush().map_err(write_err)
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.rng_seed {
        cfg.rng_seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(f) = cli.seed_format {
        for s in &mut cfg.seeds {
            s.format = f;
        }
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn gateway(cli: &Cli, cfg: &PipelineConfig) -> Result<LlmGateway, CliError> {
    let backend: Arc<dyn Backend> = match (&cli.replay, cfg.backend) {
        (Some(log), _) => Arc::new(ReplayBackend::load(log)?),
        (None, BackendKind::Simulated) => Arc::new(SimulatedBackend::new()),
        (None, BackendKind::Http) => Arc::new(HttpBackend::from_env(cfg.gateway.clone())?),
    };
    let gw = LlmGateway::new(backend, cfg.gateway.clone())?;
    Ok(match &cli.record {
        Some(log) => gw.with_exchange_log(log)?,
        None => gw,
    })
}

/// Templates from a seed corpus directory, a pool file (`.jsonl`), or a
/// statement file with one query per line.
fn load_pool(input: &str, format: SeedFormat) -> Result<TemplatePool, CliError> {
    let path = PathBuf::from(input);
    if input != "-" && path.is_dir() {
        let load = load_seed(&path, format).map_err(|e| CliError::Input(e.to_string()))?;
        if !load.skipped.is_empty() {
            eprintln!("skipped {} unsupported seed record(s)", load.skipped.len());
        }
        let mut pool = TemplatePool::new();
        for s in &load.samples {
            pool.insert(templatize(&s.sql));
        }
        return Ok(pool);
    }
    let text = if input == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(&path).map_err(io_err(&path))?
    };
    if path.extension().is_some_and(|e| e == "jsonl") {
        return TemplatePool::read_jsonl(text.as_bytes()).map_err(|e| CliError::Input(format!("{input}: {e}")));
    }
    let mut pool = TemplatePool::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("--") {
            continue;
        }
        let ast = parse_sql(line).map_err(|e| CliError::Input(format!("{input} line {}: {e}", i + 1)))?;
        pool.insert(templatize(&ast));
    }
    Ok(pool)
}

fn validate_dataset(dataset: &Path, templates: Option<&Path>) -> Result<Vec<ValidationReport>, CliError> {
    let records = load_dataset(dataset).map_err(|e| CliError::Input(e.to_string()))?;
    let default_pool = dataset.parent().unwrap_or(Path::new(".")).join(TEMPLATES_FILE);
    let pool_path = templates.map(Path::to_path_buf).or_else(|| default_pool.exists().then_some(default_pool));
    let pool = match &pool_path {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(io_err(p))?;
            Some(
                TemplatePool::read_jsonl(BufReader::new(f))
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let mut reports = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let schema = r.schema().map_err(|e| CliError::Input(format!("record {}: {e}", i + 1)))?;
        let sample = AugmentedSample {
            id: format!("{}#{}", dataset.display(), i + 1),
            question: r.question.clone(),
            schema,
            sql: r.sql.clone(),
            domain: r.domain.clone(),
            template_id: r.template_id.clone(),
            round: 0,
            validation: None,
        };
        let t = match (&pool, r.sql_ast()) {
            (Some(pool), _) => pool
                .get(&r.template_id)
                .cloned()
                .ok_or_else(|| CliError::Input(format!("record {}: template {} not in pool", i + 1, r.template_id)))?,
            (None, Ok(ast)) => templatize(&ast),
            // The parse stage fails first, so any template will do.
            (None, Err(_)) => {
                Template::parse("SELECT [column] FROM [table]", Provenance::Seed).expect("static template")
            }
        };
        reports.push(validate_sample(&sample, &t).map_err(|e| CliError::Engine(e.to_string()))?);
    }
    Ok(reports)
}
