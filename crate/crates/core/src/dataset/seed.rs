//! Spider- and BIRD-style seed corpora: a samples file joined to a tables
//! file by database id.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DatasetError, SeedSample, SeedSource};
use crate::ast::parse_sql;
use crate::schema::{Column, ForeignKey, Schema, SqlType, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedFormat {
    Spider,
    Bird,
}

impl FromStr for SeedFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spider" => Ok(SeedFormat::Spider),
            "bird" => Ok(SeedFormat::Bird),
            other => Err(format!("unknown seed format {other:?} (expected spider or bird)")),
        }
    }
}

impl SeedFormat {
    fn source(self) -> SeedSource {
        match self {
            SeedFormat::Spider => SeedSource::Spider,
            SeedFormat::Bird => SeedSource::Bird,
        }
    }

    fn samples_candidates(self) -> &'static [&'static str] {
        match self {
            SeedFormat::Spider => &["train_spider.json", "train.json"],
            SeedFormat::Bird => &["train.json"],
        }
    }

    fn tables_candidates(self) -> &'static [&'static str] {
        match self {
            SeedFormat::Spider => &["tables.json"],
            SeedFormat::Bird => &["train_tables.json", "tables.json"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    /// 1-based position in the samples file.
    pub index: usize,
    pub db_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedLoad {
    pub samples: Vec<SeedSample>,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Deserialize)]
struct TablesEntry {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<Value>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct SampleEntry {
    db_id: String,
    question: String,
    #[serde(alias = "SQL")]
    query: String,
}

fn find(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// Loads a corpus directory in the given format.
pub fn load_seed(dir: &Path, format: SeedFormat) -> Result<SeedLoad, DatasetError> {
    let tables = find(dir, format.tables_candidates()).ok_or_else(|| {
        DatasetError::MissingSchemaFile(dir.join(format.tables_candidates()[0]).display().to_string())
    })?;
    let samples = find(dir, format.samples_candidates()).ok_or_else(|| {
        DatasetError::MissingSamplesFile(dir.join(format.samples_candidates()[0]).display().to_string())
    })?;
    load_seed_files(&samples, &tables, format)
}

pub fn load_seed_files(samples: &Path, tables: &Path, format: SeedFormat) -> Result<SeedLoad, DatasetError> {
    if !tables.is_file() {
        return Err(DatasetError::MissingSchemaFile(tables.display().to_string()));
    }
    if !samples.is_file() {
        return Err(DatasetError::MissingSamplesFile(samples.display().to_string()));
    }
    let tables_text = std::fs::read_to_string(tables)?;
    let samples_text = std::fs::read_to_string(samples)?;
    parse_seed((&samples.display().to_string(), &samples_text), (&tables.display().to_string(), &tables_text), format)
}

/// Joins a samples document to a tables document, each given as
/// `(name used in errors, JSON text)`.
pub fn parse_seed(samples: (&str, &str), tables: (&str, &str), format: SeedFormat) -> Result<SeedLoad, DatasetError> {
    let schemas = read_tables(tables.0, tables.1)?;
    let sample_file = samples.0.to_string();
    let records: Vec<Value> = read_array(samples.0, samples.1)?;
    let mut out = SeedLoad { samples: Vec::new(), skipped: Vec::new() };
    for (i, raw) in records.into_iter().enumerate() {
        let malformed =
            |reason: String| DatasetError::MalformedRecord { file: sample_file.clone(), line: i + 1, reason };
        let rec: SampleEntry = serde_json::from_value(raw).map_err(|e| malformed(e.to_string()))?;
        let schema = match schemas.get(&rec.db_id) {
            None => return Err(malformed(format!("unknown db_id {:?}", rec.db_id))),
            Some(Err(reason)) => {
                out.skipped.push(SkippedRecord { index: i + 1, db_id: rec.db_id, reason: reason.clone() });
                continue;
            }
            Some(Ok(s)) => s,
        };
        match parse_sql(&rec.query) {
            Ok(sql) => out.samples.push(SeedSample {
                question: rec.question,
                domain: rec.db_id,
                schema: schema.clone(),
                sql,
                source: format.source(),
            }),
            Err(e) => {
                tracing::debug!(index = i + 1, db_id = %rec.db_id, error = %e, "skipping unsupported seed statement");
                out.skipped.push(SkippedRecord { index: i + 1, db_id: rec.db_id, reason: e.to_string() });
            }
        }
    }
    tracing::info!(loaded = out.samples.len(), skipped = out.skipped.len(), "seed corpus loaded");
    Ok(out)
}

fn read_array(file: &str, text: &str) -> Result<Vec<Value>, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::MalformedRecord {
        file: file.to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Database schemas by id. A database whose schema breaks the schema
/// invariants maps to the reason, and its samples are skipped.
fn read_tables(file: &str, text: &str) -> Result<HashMap<String, Result<Schema, String>>, DatasetError> {
    let mut out = HashMap::new();
    for (i, raw) in read_array(file, text)?.into_iter().enumerate() {
        let malformed = |reason: String| DatasetError::MalformedRecord { file: file.to_string(), line: i + 1, reason };
        let entry: TablesEntry = serde_json::from_value(raw).map_err(|e| malformed(e.to_string()))?;
        let schema = build_schema(&entry).map_err(malformed)?;
        let checked = schema.validate().map(|_| schema).map_err(|e| format!("schema {}: {e}", entry.db_id));
        out.insert(entry.db_id, checked);
    }
    Ok(out)
}

fn column_type(declared: &str) -> SqlType {
    if declared.eq_ignore_ascii_case("number") {
        SqlType::Integer
    } else {
        SqlType::from_declared(declared)
    }
}

fn build_schema(e: &TablesEntry) -> Result<Schema, String> {
    if e.column_types.len() != e.column_names_original.len() {
        return Err(format!(
            "{} column names but {} column types",
            e.column_names_original.len(),
            e.column_types.len()
        ));
    }
    let table_of = |col: usize| -> Result<usize, String> {
        match e.column_names_original.get(col) {
            Some((t, _)) if *t >= 0 && (*t as usize) < e.table_names_original.len() => Ok(*t as usize),
            _ => Err(format!("column index {col} names no table column")),
        }
    };
    let mut pk_per_table: HashMap<usize, Vec<usize>> = HashMap::new();
    for pk in &e.primary_keys {
        match pk {
            Value::Number(n) => {
                let col = n.as_u64().ok_or("primary key index is not an integer")? as usize;
                pk_per_table.entry(table_of(col)?).or_default().push(col);
            }
            // Composite keys are not modelled.
            Value::Array(_) => {}
            other => return Err(format!("unexpected primary key entry {other}")),
        }
    }
    let mut tables: Vec<Table> = e.table_names_original.iter().map(|n| Table::new(n.clone(), Vec::new())).collect();
    for (col, ((t, name), ty)) in e.column_names_original.iter().zip(&e.column_types).enumerate() {
        if *t < 0 {
            continue;
        }
        let t = table_of(col)?;
        let is_pk = pk_per_table.get(&t).is_some_and(|cols| cols.len() == 1 && cols[0] == col);
        tables[t].columns.push(Column { name: name.clone(), declared_type: column_type(ty), is_primary_key: is_pk });
    }
    for &(from, to) in &e.foreign_keys {
        let (ft, tt) = (table_of(from)?, table_of(to)?);
        let fk = ForeignKey {
            local_column: e.column_names_original[from].1.clone(),
            ref_table: e.table_names_original[tt].clone(),
            ref_column: e.column_names_original[to].1.clone(),
        };
        if !tables[ft].foreign_keys.contains(&fk) {
            tables[ft].foreign_keys.push(fk);
        }
    }
    Ok(Schema::new(tables))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLES: &str = r#"[{"db_id":"concert_singer",
        "table_names_original":["stadium","singer","concert"],
        "column_names_original":[[-1,"*"],[0,"Stadium_ID"],[0,"Name"],[0,"Capacity"],[1,"Singer_ID"],[1,"Name"],[1,"Age"],[2,"concert_ID"],[2,"Stadium_ID"]],
        "column_types":["text","number","text","number","number","text","number","number","text"],
        "primary_keys":[1,4,7],
        "foreign_keys":[[8,1]]}]"#;

    fn corpus(samples: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tables.json"), TABLES).unwrap();
        std::fs::write(dir.path().join("train_spider.json"), samples).unwrap();
        let p = dir.path().to_path_buf();
        (dir, p)
    }

    #[test]
    fn three_spider_records() {
        let (_d, p) = corpus(
            r#"[{"db_id":"concert_singer","question":"How many singers do we have?","query":"SELECT count(*) FROM singer"},
                {"db_id":"concert_singer","question":"Names of stadiums?","query":"SELECT Name FROM stadium"},
                {"db_id":"concert_singer","question":"Ages?","query":"SELECT T1.Age FROM singer AS T1 WHERE T1.Age > 20"}]"#,
        );
        let load = load_seed(&p, SeedFormat::Spider).unwrap();
        assert_eq!(load.samples.len(), 3);
        assert!(load.skipped.is_empty());
        let s = &load.samples[0];
        assert_eq!(s.domain, "concert_singer");
        assert_eq!(s.source, SeedSource::Spider);
        let stadium = s.schema.table("stadium").unwrap();
        assert_eq!(stadium.primary_key().unwrap().name, "Stadium_ID");
        assert_eq!(stadium.column("Capacity").unwrap().declared_type, SqlType::Integer);
        let concert = s.schema.table("concert").unwrap();
        assert_eq!(
            concert.foreign_keys,
            [ForeignKey {
                local_column: "Stadium_ID".into(),
                ref_table: "stadium".into(),
                ref_column: "Stadium_ID".into()
            }]
        );
        assert_eq!(concert.column("Stadium_ID").unwrap().declared_type, SqlType::Text);
    }

    #[test]
    fn unknown_db_id_is_malformed() {
        let (_d, p) = corpus(r#"[{"db_id":"nope","question":"q","query":"SELECT 1 FROM t"}]"#);
        assert!(matches!(load_seed(&p, SeedFormat::Spider), Err(DatasetError::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn unsupported_statements_are_skipped() {
        let (_d, p) = corpus(
            r#"[{"db_id":"concert_singer","question":"q","query":"INSERT INTO singer VALUES (1)"},
                {"db_id":"concert_singer","question":"q","query":"SELECT Name FROM singer"}]"#,
        );
        let load = load_seed(&p, SeedFormat::Spider).unwrap();
        assert_eq!(load.samples.len(), 1);
        assert_eq!(load.skipped.len(), 1);
        assert_eq!(load.skipped[0].index, 1);
    }

    #[test]
    fn missing_tables_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train_spider.json"), "[]").unwrap();
        assert!(matches!(load_seed(dir.path(), SeedFormat::Spider), Err(DatasetError::MissingSchemaFile(_))));
    }

    #[test]
    fn bird_field_names() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train_tables.json"), TABLES).unwrap();
        std::fs::write(
            dir.path().join("train.json"),
            r#"[{"db_id":"concert_singer","question":"q","evidence":"ignored","SQL":"SELECT Name FROM singer"}]"#,
        )
        .unwrap();
        let load = load_seed(dir.path(), SeedFormat::Bird).unwrap();
        assert_eq!(load.samples[0].source, SeedSource::Bird);
    }
}
