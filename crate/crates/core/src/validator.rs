//! Execution gate: a sample is kept only if its schema applies and its query
//! runs on a fresh embedded database.

use std::fmt;
use std::time::{Duration, Instant};

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::ast::{parse_sql, render_sql, SqlAst};
use crate::dataset::AugmentedSample;
use crate::schema::{check_consistency, render_ddl, Schema};
use crate::template::{matches_template, Template};

pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidatorError {
    #[error("embedded engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("no reports to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    TemplateMatch,
    SchemaConsistency,
    Executability,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::Parse, Stage::TemplateMatch, Stage::SchemaConsistency, Stage::Executability];

    /// Rejection code recorded when this stage fails.
    pub fn reason_code(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::TemplateMatch => "template-mismatch",
            Stage::SchemaConsistency => "schema-inconsistent",
            Stage::Executability => "unexecutable",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::TemplateMatch => "template_match",
            Stage::SchemaConsistency => "schema_consistency",
            Stage::Executability => "executability",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: Stage,
    pub passed: bool,
}

/// Stages run in [`Stage::ORDER`]; the first failure ends the run, so
/// `stages` holds a passing prefix and at most one failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sample_id: String,
    pub stages: Vec<StageResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ValidationReport {
    fn new(sample_id: &str) -> Self {
        Self { sample_id: sample_id.to_string(), stages: Vec::new(), detail: None }
    }

    /// Records a stage outcome; returns whether validation should continue.
    fn record(&mut self, stage: Stage, outcome: Result<(), String>) -> bool {
        let passed = outcome.is_ok();
        self.stages.push(StageResult { stage, passed });
        if let Err(d) = outcome {
            self.detail = Some(d);
        }
        passed
    }

    pub fn passed(&self) -> bool {
        self.stages.len() == Stage::ORDER.len() && self.stages.iter().all(|s| s.passed)
    }

    pub fn failed_stage(&self) -> Option<Stage> {
        self.stages.iter().find(|s| !s.passed).map(|s| s.stage)
    }

    pub fn reason_code(&self) -> Option<&'static str> {
        self.failed_stage().map(Stage::reason_code)
    }

    pub fn executable(&self) -> bool {
        self.stages.iter().any(|s| s.stage == Stage::Executability && s.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStep {
    Ddl,
    Query,
    Timeout,
}

impl ExecStep {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStep::Ddl => "ddl",
            ExecStep::Query => "query",
            ExecStep::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Execution {
    Pass,
    Fail { step: ExecStep, detail: String },
}

impl Execution {
    pub fn passed(&self) -> bool {
        matches!(self, Execution::Pass)
    }
}

pub fn validate_executability(schema: &Schema, sql: &SqlAst) -> Result<Execution, ValidatorError> {
    validate_executability_with(schema, sql, DEFAULT_EXEC_TIMEOUT)
}

/// Applies the schema DDL to a private in-memory database, then prepares and
/// steps the query to completion. Empty result sets pass.
pub fn validate_executability_with(
    schema: &Schema,
    sql: &SqlAst,
    timeout: Duration,
) -> Result<Execution, ValidatorError> {
    let conn = Connection::open_in_memory().map_err(|e| ValidatorError::EngineUnavailable(e.to_string()))?;
    if let Err(e) = conn.execute_batch(&render_ddl(schema)) {
        return Ok(Execution::Fail { step: ExecStep::Ddl, detail: e.to_string() });
    }
    let started = Instant::now();
    conn.progress_handler(1000, Some(move || started.elapsed() > timeout))
        .map_err(|e| ValidatorError::EngineUnavailable(e.to_string()))?;
    let outcome = run_query(&conn, &render_sql(sql));
    Ok(match outcome {
        Ok(()) => Execution::Pass,
        Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::OperationInterrupted => {
            Execution::Fail { step: ExecStep::Timeout, detail: format!("query exceeded {} ms", timeout.as_millis()) }
        }
        Err(e) => Execution::Fail { step: ExecStep::Query, detail: e.to_string() },
    })
}

fn run_query(conn: &Connection, sql: &str) -> rusqlite::Result<()> {
    let mut stmt = conn.prepare(sql)?;
    let mut rows = stmt.query([])?;
    while rows.next()?.is_some() {}
    Ok(())
}

/// Runs parse, template match, schema consistency and executability in turn,
/// stopping at the first failure.
pub fn validate_sample(sample: &AugmentedSample, t: &Template) -> Result<ValidationReport, ValidatorError> {
    let mut report = ValidationReport::new(&sample.id);
    let ast = match parse_sql(&sample.sql) {
        Ok(ast) => {
            report.record(Stage::Parse, Ok(()));
            ast
        }
        Err(e) => {
            report.record(Stage::Parse, Err(e.to_string()));
            return Ok(report);
        }
    };
    let matched = if matches_template(&ast, t) { Ok(()) } else { Err(format!("does not match template {}", t.id)) };
    if !report.record(Stage::TemplateMatch, matched) {
        return Ok(report);
    }
    let consistency = check_consistency(&sample.schema, &ast);
    let consistent = if consistency.is_consistent() {
        Ok(())
    } else {
        Err(consistency.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    };
    if !report.record(Stage::SchemaConsistency, consistent) {
        return Ok(report);
    }
    let exec = match validate_executability(&sample.schema, &ast)? {
        Execution::Pass => Ok(()),
        Execution::Fail { step, detail } => Err(format!("{}: {detail}", step.as_str())),
    };
    report.record(Stage::Executability, exec);
    Ok(report)
}

/// Executable samples over all samples, kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
}

impl Rate {
    pub fn as_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for Rate {
    /// Three decimals, rounded half up, computed in integers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = u128::from(self.numerator) * 1000;
        let d = u128::from(self.denominator);
        let thousandths = (2 * n + d) / (2 * d);
        write!(f, "{}.{:03}", thousandths / 1000, thousandths % 1000)
    }
}

pub fn executable_rate(reports: &[ValidationReport]) -> Result<Rate, ValidatorError> {
    if reports.is_empty() {
        return Err(ValidatorError::EmptyInput);
    }
    let numerator = reports.iter().filter(|r| r.executable()).count() as u64;
    Ok(Rate { numerator, denominator: reports.len() as u64 })
}
