use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSource {
    Seed,
    Explored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub name: String,
    pub normalized: String,
    pub source: DomainSource,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("domain {0:?} is already registered")]
    Duplicate(String),
    #[error("domain name is empty")]
    Empty,
    #[error("registry line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Lowercase, trimmed, internal whitespace collapsed to single spaces.
pub fn normalize_domain(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Words in a domain name, counting underscores as separators.
pub fn domain_word_count(name: &str) -> usize {
    name.split(|c: char| c.is_whitespace() || c == '_').filter(|w| !w.is_empty()).count()
}

/// The explored-domain set: seed domains plus every accepted exploration,
/// unique by normalized name, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct DomainRegistry {
    entries: Vec<DomainEntry>,
    index: HashSet<String>,
}

impl DomainRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry of seed domains; repeated names are folded together.
    pub fn from_seed<S: AsRef<str>>(names: &[S]) -> Self {
        let mut r = Self::new();
        for n in names {
            let _ = r.insert(n.as_ref(), DomainSource::Seed, 0);
        }
        r
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains(&normalize_domain(name))
    }

    pub fn insert(&mut self, name: &str, source: DomainSource, round: u32) -> Result<(), RegistryError> {
        let normalized = normalize_domain(name);
        if normalized.is_empty() {
            return Err(RegistryError::Empty);
        }
        if !self.index.insert(normalized.clone()) {
            return Err(RegistryError::Duplicate(name.to_string()));
        }
        self.entries.push(DomainEntry { name: name.trim().to_string(), normalized, source, round });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DomainEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn explored(&self) -> impl Iterator<Item = &DomainEntry> {
        self.entries.iter().filter(|e| e.source == DomainSource::Explored)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, RegistryError> {
        let mut r = Self::new();
        for (i, line) in input.lines().enumerate() {
            let malformed = |reason: String| RegistryError::Malformed { line: i + 1, reason };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: DomainEntry = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            if e.normalized != normalize_domain(&e.name) {
                return Err(malformed(format!("normalized form of {:?} is not {:?}", e.name, e.normalized)));
            }
            r.insert(&e.name, e.source, e.round).map_err(|err| malformed(err.to_string()))?;
        }
        Ok(r)
    }
}
