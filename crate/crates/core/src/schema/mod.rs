//! Database schemas for generated statements: the model, deterministic
//! inference from SQL, consistency checking, DDL rendering/reading and
//! LLM-backed generation.

mod analysis;
mod consistency;
mod ddl;
mod generate;
mod infer;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use analysis::{analyze_references, ColumnUse, JoinLink, References};
pub use consistency::{check_consistency, ConsistencyReport, Violation};
pub use ddl::{read_ddl, render_ddl, DdlError};
pub use generate::{generate_schema, SchemaAttempt, SchemaGenError};
pub use infer::{infer_schema, infer_schema_lenient, InferError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SqlType {
    Integer,
    Text,
    Real,
}

impl SqlType {
    pub fn as_str(self) -> &'static str {
        match self {
            SqlType::Integer => "INTEGER",
            SqlType::Text => "TEXT",
            SqlType::Real => "REAL",
        }
    }

    /// Maps a declared type name to one of the three supported types using
    /// SQLite's affinity rules, with NUMERIC affinity read as REAL.
    pub fn from_declared(decl: &str) -> Self {
        let d = decl.to_ascii_uppercase();
        if d.contains("INT") || d.contains("BOOL") {
            SqlType::Integer
        } else if d.contains("CHAR") || d.contains("CLOB") || d.contains("TEXT") || d.contains("BLOB") || d.is_empty() {
            SqlType::Text
        } else if ["REAL", "FLOA", "DOUB", "NUM", "DEC"].iter().any(|k| d.contains(k)) {
            SqlType::Real
        } else {
            SqlType::Text
        }
    }
}

impl fmt::Display for SqlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub declared_type: SqlType,
    pub is_primary_key: bool,
}

impl Column {
    pub fn new(name: impl Into<String>, declared_type: SqlType) -> Self {
        Self { name: name.into(), declared_type, is_primary_key: false }
    }

    pub fn primary(name: impl Into<String>, declared_type: SqlType) -> Self {
        Self { name: name.into(), declared_type, is_primary_key: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub local_column: String,
    pub ref_table: String,
    pub ref_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Self { name: name.into(), columns, foreign_keys: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn primary_key(&self) -> Option<&Column> {
        self.columns.iter().find(|c| c.is_primary_key)
    }

    pub fn with_fk(mut self, local: &str, ref_table: &str, ref_column: &str) -> Self {
        self.foreign_keys.push(ForeignKey {
            local_column: local.into(),
            ref_table: ref_table.into(),
            ref_column: ref_column.into(),
        });
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("duplicate table {0}")]
    DuplicateTable(String),
    #[error("duplicate column {column} in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("table {0} declares more than one primary-key column")]
    MultiplePrimaryKeys(String),
    #[error("table {table} has no columns")]
    EmptyTable { table: String },
    #[error("foreign key {table}.{column} references missing {ref_table}.{ref_column}")]
    DanglingForeignKey { table: String, column: String, ref_table: String, ref_column: String },
    #[error("foreign key column {column} is not a column of {table}")]
    UnknownForeignKeyColumn { table: String, column: String },
}

impl Schema {
    pub fn new(tables: Vec<Table>) -> Self {
        Self { tables }
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Case-insensitive lookup, matching SQLite name resolution.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        for (i, t) in self.tables.iter().enumerate() {
            if self.tables[..i].iter().any(|o| o.name.eq_ignore_ascii_case(&t.name)) {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
            if t.columns.is_empty() {
                return Err(SchemaError::EmptyTable { table: t.name.clone() });
            }
            for (j, c) in t.columns.iter().enumerate() {
                if t.columns[..j].iter().any(|o| o.name.eq_ignore_ascii_case(&c.name)) {
                    return Err(SchemaError::DuplicateColumn { table: t.name.clone(), column: c.name.clone() });
                }
            }
            if t.columns.iter().filter(|c| c.is_primary_key).count() > 1 {
                return Err(SchemaError::MultiplePrimaryKeys(t.name.clone()));
            }
            for fk in &t.foreign_keys {
                if t.column(&fk.local_column).is_none() {
                    return Err(SchemaError::UnknownForeignKeyColumn {
                        table: t.name.clone(),
                        column: fk.local_column.clone(),
                    });
                }
                if self.table(&fk.ref_table).and_then(|rt| rt.column(&fk.ref_column)).is_none() {
                    return Err(SchemaError::DanglingForeignKey {
                        table: t.name.clone(),
                        column: fk.local_column.clone(),
                        ref_table: fk.ref_table.clone(),
                        ref_column: fk.ref_column.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}
