use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_crossovers, CrossoverStats, Provenance, Template};

/// Templates keyed by id, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TemplatePool {
    templates: Vec<Template>,
    by_id: HashMap<String, usize>,
}

/// One line of a persisted pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub id: String,
    pub rendered_template: String,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("pool line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TemplatePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts unless a template with the same id is present.
    pub fn insert(&mut self, t: Template) -> bool {
        if self.by_id.contains_key(&t.id) {
            return false;
        }
        self.by_id.insert(t.id.clone(), self.templates.len());
        self.templates.push(t);
        true
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.by_id.get(id).map(|&i| &self.templates[i])
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter()
    }

    pub fn as_slice(&self) -> &[Template] {
        &self.templates
    }

    pub fn records(&self) -> impl Iterator<Item = PoolRecord> + '_ {
        self.templates.iter().map(|t| PoolRecord {
            id: t.id.clone(),
            rendered_template: t.render(),
            provenance: t.provenance.clone(),
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a pool, re-parsing every template and checking its stored id.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, PoolError> {
        let mut pool = Self::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| PoolError::Malformed { line: idx + 1, reason };
            let rec: PoolRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let t = Template::parse(&rec.rendered_template, rec.provenance).map_err(|e| malformed(e.to_string()))?;
            if t.id != rec.id {
                return Err(malformed(format!("id {} does not match template hash {}", rec.id, t.id)));
            }
            pool.insert(t);
        }
        Ok(pool)
    }
}

/// Grows the pool by crossover until it holds `ceil(multiplier * initial)`
/// templates or the attempt budget runs out.
pub fn enrich_pool(pool: &mut TemplatePool, multiplier: f64, seed: u64) -> CrossoverStats {
    let target = (pool.len() as f64 * multiplier.max(1.0)).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = CrossoverStats::default();
    let budget = target.saturating_mul(20);
    while pool.len() < target && total.attempted < budget {
        let (children, stats) = random_crossovers(pool, 1, &mut rng);
        if stats.attempted == 0 {
            total.skipped_pairs += stats.skipped_pairs;
            break;
        }
        total.attempted += stats.attempted;
        total.discarded += stats.discarded;
        total.skipped_pairs += stats.skipped_pairs;
        for child in children {
            if pool.insert(child) {
                total.novel += 1;
            } else {
                total.duplicates += 1;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_sql;
    use crate::template::templatize;

    fn seed_pool() -> TemplatePool {
        let mut pool = TemplatePool::new();
        for sql in [
            "SELECT name FROM singer WHERE age > 20 ORDER BY age DESC",
            "SELECT count(*) FROM concert WHERE year = 2014",
            "SELECT country, count(*) FROM singer GROUP BY country ORDER BY count(*) DESC LIMIT 1",
            "SELECT T1.name FROM a AS T1 JOIN b AS T2 ON T1.id = T2.a_id WHERE T2.v = 'x' LIMIT 3",
        ] {
            pool.insert(templatize(&parse_sql(sql).unwrap()));
        }
        pool
    }

    #[test]
    fn dedup_by_id() {
        let mut pool = TemplatePool::new();
        assert!(pool.insert(templatize(&parse_sql("SELECT a FROM t").unwrap())));
        assert!(!pool.insert(templatize(&parse_sql("SELECT b FROM u").unwrap())));
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut pool = seed_pool();
        enrich_pool(&mut pool, 2.0, 7);
        let mut buf = Vec::new();
        pool.write_jsonl(&mut buf).unwrap();
        let back = TemplatePool::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.records().collect::<Vec<_>>(), pool.records().collect::<Vec<_>>());
    }

    #[test]
    fn tampered_id_rejected() {
        let line = r#"{"id":"0000000000000000","rendered_template":"SELECT [column] FROM [table]","provenance":{"kind":"seed"}}"#;
        assert!(matches!(TemplatePool::read_jsonl(line.as_bytes()), Err(PoolError::Malformed { line: 1, .. })));
    }

    #[test]
    fn enrichment_is_seeded() {
        let mut a = seed_pool();
        let mut b = seed_pool();
        let sa = enrich_pool(&mut a, 2.0, 11);
        let sb = enrich_pool(&mut b, 2.0, 11);
        assert_eq!(sa, sb);
        assert_eq!(a.records().collect::<Vec<_>>(), b.records().collect::<Vec<_>>());
        assert_eq!(a.len(), 8);
        assert!(a.iter().skip(4).all(|t| matches!(t.provenance, Provenance::Crossover { .. })));
    }
}
