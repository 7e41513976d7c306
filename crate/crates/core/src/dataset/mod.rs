//! Seed corpora in, augmented dataset and run statistics out.

mod seed;
mod stats;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ast::{parse_sql, render_sql, ParseError, SqlAst};
use crate::schema::{read_ddl, render_ddl, DdlError, Schema};
use crate::validator::ValidationReport;

pub use seed::{load_seed, load_seed_files, parse_seed, SeedFormat, SeedLoad, SkippedRecord};
pub use stats::{compute_stats, RunStats};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema file not found: {0}")]
    MissingSchemaFile(String),
    #[error("samples file not found: {0}")]
    MissingSamplesFile(String),
    #[error("{file} record {line}: {reason}")]
    MalformedRecord { file: String, line: usize, reason: String },
    #[error("sample {0} has no passing validation report")]
    UnvalidatedSample(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Spider,
    Bird,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSample {
    pub question: String,
    /// Database id of the source corpus.
    pub domain: String,
    pub schema: Schema,
    pub sql: SqlAst,
    pub source: SeedSource,
}

/// A synthesized (question, schema, SQL) triple. `sql` is kept in canonical
/// rendering so samples serialize without an AST codec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub id: String,
    pub question: String,
    pub schema: Schema,
    pub sql: String,
    pub domain: String,
    pub template_id: String,
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
}

impl AugmentedSample {
    pub fn sql_ast(&self) -> Result<SqlAst, ParseError> {
        parse_sql(&self.sql)
    }

    pub fn is_validated(&self) -> bool {
        self.validation.as_ref().is_some_and(ValidationReport::passed)
    }
}

/// One line of the emitted dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub question: String,
    pub schema_ddl: String,
    pub sql: String,
    pub domain: String,
    pub template_id: String,
}

impl From<&AugmentedSample> for DatasetRecord {
    fn from(s: &AugmentedSample) -> Self {
        Self {
            question: s.question.clone(),
            schema_ddl: render_ddl(&s.schema),
            sql: s.sql.clone(),
            domain: s.domain.clone(),
            template_id: s.template_id.clone(),
        }
    }
}

impl DatasetRecord {
    pub fn schema(&self) -> Result<Schema, DdlError> {
        read_ddl(&self.schema_ddl)
    }

    pub fn sql_ast(&self) -> Result<SqlAst, ParseError> {
        parse_sql(&self.sql)
    }

    /// Three-section layout used for instruction tuning.
    pub fn instruction_text(&self) -> String {
        instruction_block(&self.question, &self.schema_ddl, &self.sql)
    }
}

pub fn instruction_block(question: &str, schema_ddl: &str, sql: &str) -> String {
    format!("### Question:\n{question}\n### Schema:\n{schema_ddl}\n### SQL:\n{sql}\n")
}

/// Writes one JSON line per sample. Every sample must carry a passing
/// validation report; otherwise nothing is written.
pub fn emit_dataset(samples: &[AugmentedSample], path: &Path) -> Result<usize, DatasetError> {
    if let Some(s) = samples.iter().find(|s| !s.is_validated()) {
        return Err(DatasetError::UnvalidatedSample(s.id.clone()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, &DatasetRecord::from(s)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(samples.len())
}

/// Instruction-format export: one block per sample, blank-line separated.
pub fn emit_instructions(samples: &[AugmentedSample], path: &Path) -> Result<usize, DatasetError> {
    if let Some(s) = samples.iter().find(|s| !s.is_validated()) {
        return Err(DatasetError::UnvalidatedSample(s.id.clone()));
    }
    let blocks: Vec<String> = samples.iter().map(|s| DatasetRecord::from(s).instruction_text()).collect();
    std::fs::write(path, blocks.join("\n"))?;
    Ok(samples.len())
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    parse_dataset(BufReader::new(File::open(path)?), &path.display().to_string())
}

/// Reads dataset lines; `file` names the source in errors.
pub fn parse_dataset<R: BufRead>(input: R, file: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
            file: file.to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Canonical SQL text of a parsed statement.
pub fn canonical_sql(ast: &SqlAst) -> String {
    render_sql(ast)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::validator::{Stage, StageResult};

    pub fn passing_report(id: &str) -> ValidationReport {
        ValidationReport {
            sample_id: id.into(),
            stages: Stage::ORDER.iter().map(|&stage| StageResult { stage, passed: true }).collect(),
            detail: None,
        }
    }

    pub fn table1_sample() -> AugmentedSample {
        AugmentedSample {
            id: "s000000".into(),
            question: "Which are the top 10 campaigns with the highest total number of clicks?".into(),
            schema: crate::schema::fixtures::table1_schema(),
            sql: crate::schema::fixtures::TABLE1_SQL.into(),
            domain: "advertising".into(),
            template_id: "t".into(),
            round: 0,
            validation: Some(passing_report("s000000")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn table1_instruction_layout() {
        let r = DatasetRecord::from(&table1_sample());
        let expected = "### Question:\nWhich are the top 10 campaigns with the highest total number of clicks?\n### Schema:\nCREATE TABLE Campaigns(\n    CampaignID INTEGER PRIMARY KEY,\n    CampaignName TEXT,\n    FOREIGN KEY(CampaignID) REFERENCES Impressions(CampaignID)\n);\nCREATE TABLE Impressions(\n    ImpressionID INTEGER PRIMARY KEY,\n    CampaignID INTEGER,\n    Clicks INTEGER,\n    FOREIGN KEY(CampaignID) REFERENCES Campaigns(CampaignID)\n);\n### SQL:\nSELECT C.CampaignName FROM Campaigns AS C JOIN Impressions AS I ON C.CampaignID = I.CampaignID GROUP BY C.CampaignName ORDER BY SUM(I.Clicks) DESC LIMIT 10\n";
        assert_eq!(r.instruction_text(), expected);
    }

    #[test]
    fn empty_emission() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        assert_eq!(emit_dataset(&[], &p).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
    }

    #[test]
    fn unvalidated_sample_blocks_emission() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut bad = table1_sample();
        bad.id = "s1".into();
        bad.validation.as_mut().unwrap().stages[3].passed = false;
        let err = emit_dataset(&[table1_sample(), bad], &p).unwrap_err();
        assert!(matches!(err, DatasetError::UnvalidatedSample(id) if id == "s1"));
        assert!(!p.exists());
    }

    #[test]
    fn emission_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let s = table1_sample();
        emit_dataset(std::slice::from_ref(&s), &p).unwrap();
        let back = load_dataset(&p).unwrap();
        assert_eq!(back, [DatasetRecord::from(&s)]);
        assert_eq!(back[0].schema().unwrap(), s.schema);
        assert_eq!(canonical_sql(&back[0].sql_ast().unwrap()), s.sql);
    }
}
