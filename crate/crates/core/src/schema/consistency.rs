//! Checking that a schema supports every reference a statement makes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::SqlAst;

use super::analysis::{analyze_references, ColumnUse};
use super::Schema;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingTable {
        table: String,
    },
    MissingColumn {
        table: String,
        column: String,
    },
    /// An unqualified column found in none of the candidate tables.
    UnplacedColumn {
        column: String,
        candidates: Vec<String>,
    },
    /// An unqualified column found in more than one candidate table.
    AmbiguousColumn {
        column: String,
        candidates: Vec<String>,
    },
    UnresolvedAlias {
        alias: String,
    },
    MissingForeignKey {
        from_table: String,
        from_column: String,
        to_table: String,
        to_column: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingTable { table } => write!(f, "missing table {table}"),
            Violation::MissingColumn { table, column } => write!(f, "missing column {table}.{column}"),
            Violation::UnplacedColumn { column, candidates } => {
                write!(f, "column {column} exists in none of {}", candidates.join(", "))
            }
            Violation::AmbiguousColumn { column, candidates } => {
                write!(f, "column {column} is ambiguous between {}", candidates.join(", "))
            }
            Violation::UnresolvedAlias { alias } => write!(f, "unresolved qualifier {alias}"),
            Violation::MissingForeignKey { from_table, from_column, to_table, to_column } => {
                write!(f, "no foreign key between {from_table}.{from_column} and {to_table}.{to_column}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every reference in `sql` that `schema` cannot satisfy. Name matching
/// is case-insensitive; a JOIN equality is satisfied by a foreign key declared
/// in either direction.
pub fn check_consistency(schema: &Schema, sql: &SqlAst) -> ConsistencyReport {
    let refs = analyze_references(sql);
    let mut violations = Vec::new();
    for alias in &refs.unresolved_aliases {
        violations.push(Violation::UnresolvedAlias { alias: alias.clone() });
    }
    for t in &refs.tables {
        if schema.table(t).is_none() {
            violations.push(Violation::MissingTable { table: t.clone() });
        }
    }
    for u in &refs.columns {
        match u {
            ColumnUse::Resolved { table, column } => {
                if schema.table(table).and_then(|t| t.column(column)).is_none() {
                    violations.push(Violation::MissingColumn { table: table.clone(), column: column.clone() });
                }
            }
            ColumnUse::Ambiguous { column, candidates } => {
                let holders =
                    candidates.iter().filter(|c| schema.table(c).and_then(|t| t.column(column)).is_some()).count();
                match holders {
                    1 => {}
                    0 => violations
                        .push(Violation::UnplacedColumn { column: column.clone(), candidates: candidates.clone() }),
                    _ => violations
                        .push(Violation::AmbiguousColumn { column: column.clone(), candidates: candidates.clone() }),
                }
            }
        }
    }
    for link in &refs.joins {
        let declared = |(t, c): &(String, String), (rt, rc): &(String, String)| {
            schema.table(t).is_some_and(|tab| {
                tab.foreign_keys.iter().any(|fk| {
                    fk.local_column.eq_ignore_ascii_case(c)
                        && fk.ref_table.eq_ignore_ascii_case(rt)
                        && fk.ref_column.eq_ignore_ascii_case(rc)
                })
            })
        };
        if !declared(&link.local, &link.referenced) && !declared(&link.referenced, &link.local) {
            violations.push(Violation::MissingForeignKey {
                from_table: link.local.0.clone(),
                from_column: link.local.1.clone(),
                to_table: link.referenced.0.clone(),
                to_column: link.referenced.1.clone(),
            });
        }
    }
    ConsistencyReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_sql;
    use crate::schema::fixtures::{table1_schema, TABLE1_SQL};
    use crate::schema::{infer_schema, Column, SqlType, Table};

    fn check(schema: &Schema, sql: &str) -> Vec<Violation> {
        check_consistency(schema, &parse_sql(sql).unwrap()).violations
    }

    #[test]
    fn table1_is_consistent() {
        assert_eq!(check(&table1_schema(), TABLE1_SQL), []);
    }

    #[test]
    fn missing_table_with_dependent_columns() {
        let mut s = table1_schema();
        s.tables.retain(|t| t.name != "Impressions");
        assert_eq!(
            check(&s, TABLE1_SQL),
            [
                Violation::MissingTable { table: "Impressions".into() },
                Violation::MissingColumn { table: "Impressions".into(), column: "CampaignID".into() },
                Violation::MissingColumn { table: "Impressions".into(), column: "Clicks".into() },
            ]
        );
    }

    #[test]
    fn missing_foreign_key() {
        let mut s = table1_schema();
        s.tables.iter_mut().for_each(|t| t.foreign_keys.clear());
        assert_eq!(
            check(&s, TABLE1_SQL),
            [Violation::MissingForeignKey {
                from_table: "Impressions".into(),
                from_column: "CampaignID".into(),
                to_table: "Campaigns".into(),
                to_column: "CampaignID".into(),
            }]
        );
    }

    #[test]
    fn case_insensitive_and_ambiguity_resolution() {
        let s = Schema::new(vec![
            Table::new("X", vec![Column::new("A", SqlType::Text), Column::new("K", SqlType::Integer)]),
            Table::new("y", vec![Column::new("k", SqlType::Integer)]).with_fk("k", "x", "k"),
        ]);
        assert_eq!(check(&s, "SELECT a FROM x JOIN y ON x.k = y.k"), []);
        assert_eq!(
            check(&s, "SELECT k FROM x JOIN y ON x.k = y.k"),
            [Violation::AmbiguousColumn { column: "k".into(), candidates: vec!["x".into(), "y".into()] }]
        );
        assert_eq!(
            check(&s, "SELECT zz FROM x JOIN y ON x.k = y.k"),
            [Violation::UnplacedColumn { column: "zz".into(), candidates: vec!["x".into(), "y".into()] }]
        );
    }

    #[test]
    fn inferred_schema_is_consistent() {
        for sql in [
            TABLE1_SQL,
            "SELECT x.a FROM x JOIN y ON x.k = y.k",
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer)",
            "SELECT T1.name FROM a AS T1 JOIN b AS T2 ON T1.id = T2.a_id WHERE T2.v = 'x' UNION SELECT c FROM d",
        ] {
            let ast = parse_sql(sql).unwrap();
            let s = infer_schema(&ast).unwrap();
            assert!(check_consistency(&s, &ast).is_consistent(), "{sql}");
        }
    }
}
