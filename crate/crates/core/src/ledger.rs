//! Append-only run ledger: one JSON line per exploration round, per rejected
//! attempt, and per finished sample.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Explore,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Explore,
    Sql,
    Schema,
    Translate,
    Validate,
    /// Terminal record of a phase-2 sample.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Reject,
    /// A rejected attempt that was retried within budget.
    Retry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub phase: Phase,
    pub round: u32,
    pub sample_id: String,
    pub step: Step,
    pub template_id: String,
    pub domain: String,
    pub outcome: Outcome,
    /// Rejection code, e.g. `template-mismatch`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Model calls made for the whole round or sample, set on the terminal
    /// record only.
    #[serde(default)]
    pub llm_calls: u32,
}

impl LedgerRecord {
    /// Whether this record closes a unit of work (a round or a sample).
    pub fn is_terminal(&self) -> bool {
        match self.phase {
            Phase::Explore => self.outcome != Outcome::Retry,
            Phase::Generate => self.step == Step::Sample,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub struct Ledger {
    out: Mutex<BufWriter<File>>,
}

impl Ledger {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: Mutex::new(BufWriter::new(f)) })
    }

    /// Appends records as one flushed batch.
    pub fn append(&self, records: &[LedgerRecord]) -> Result<(), LedgerError> {
        let mut w = self.out.lock().expect("ledger writer");
        for r in records {
            serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRecord>, LedgerError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    parse_ledger(BufReader::new(File::open(path)?))
}

pub fn parse_ledger<R: BufRead>(input: R) -> Result<Vec<LedgerRecord>, LedgerError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r =
            serde_json::from_str(&line).map_err(|e| LedgerError::Malformed { line: i + 1, reason: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}

/// Sample ids whose terminal record is present.
pub fn completed_samples(records: &[LedgerRecord]) -> BTreeSet<String> {
    records.iter().filter(|r| r.phase == Phase::Generate && r.is_terminal()).map(|r| r.sample_id.clone()).collect()
}
