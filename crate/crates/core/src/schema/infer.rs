//! Minimal schema implied by a single statement.

use crate::ast::SqlAst;

use super::analysis::{analyze_references, ColumnUse};
use super::{Column, ForeignKey, Schema, SqlType, Table};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferError {
    #[error("column {column} could belong to any of {candidates:?}")]
    AmbiguousColumn { column: String, candidates: Vec<String> },
    #[error("qualifier {0} names no table or alias in scope")]
    UnresolvedAlias(String),
}

/// `id`, or a name ending in `ID`, `Id` or `_id`.
pub(crate) fn is_id_like(name: &str) -> bool {
    name.eq_ignore_ascii_case("id") || name.ends_with("ID") || name.ends_with("Id") || name.ends_with("_id")
}

fn id_stem(name: &str) -> &str {
    let stem = &name[..name.len() - 2];
    stem.strip_suffix('_').unwrap_or(stem)
}

fn singular(word: &str) -> String {
    let w = word.to_ascii_lowercase();
    if let Some(s) = w.strip_suffix("ies") {
        format!("{s}y")
    } else if w.ends_with("ses") || w.ends_with("xes") {
        w[..w.len() - 2].to_string()
    } else if let Some(s) = w.strip_suffix('s') {
        s.to_string()
    } else {
        w
    }
}

/// Whether `column` looks like the key of `table`: `id`, or `<table>ID` with
/// the table name taken as written or singularised.
fn is_pk_candidate(table: &str, column: &str) -> bool {
    if column.eq_ignore_ascii_case("id") {
        return true;
    }
    if !is_id_like(column) {
        return false;
    }
    let stem = id_stem(column).to_ascii_lowercase();
    !stem.is_empty() && (stem == table.to_ascii_lowercase() || stem == singular(table))
}

/// Builds the smallest schema under which `sql` resolves: every referenced
/// table with every referenced column, a guessed primary key and one foreign
/// key per cross-table JOIN equality.
pub fn infer_schema(sql: &SqlAst) -> Result<Schema, InferError> {
    build(sql, true)
}

/// Like [`infer_schema`] but never fails: an ambiguous column goes to its
/// first candidate table and unknown qualifiers are ignored.
pub fn infer_schema_lenient(sql: &SqlAst) -> Schema {
    build(sql, false).expect("lenient inference does not fail")
}

fn build(sql: &SqlAst, strict: bool) -> Result<Schema, InferError> {
    let refs = analyze_references(sql);
    if let (true, Some(q)) = (strict, refs.unresolved_aliases.first()) {
        return Err(InferError::UnresolvedAlias(q.clone()));
    }
    let mut tables: Vec<Table> = refs.tables.iter().map(|t| Table::new(t.clone(), Vec::new())).collect();
    for u in &refs.columns {
        let (table, column) = match u {
            ColumnUse::Resolved { table, column } => (table, column),
            ColumnUse::Ambiguous { column, candidates } if strict => {
                return Err(InferError::AmbiguousColumn { column: column.clone(), candidates: candidates.clone() })
            }
            ColumnUse::Ambiguous { column, candidates } => match candidates.first() {
                Some(first) => (first, column),
                None => continue,
            },
        };
        let t = tables.iter_mut().find(|t| t.name.eq_ignore_ascii_case(table)).expect("analysis records every table");
        if t.column(column).is_some() {
            continue;
        }
        let ty = match refs.numeric_evidence(table, column) {
            Some(ty) => ty,
            None if is_id_like(column) || refs.in_join(table, column) => SqlType::Integer,
            None => SqlType::Text,
        };
        t.columns.push(Column::new(column.clone(), ty));
    }
    for t in &mut tables {
        if t.columns.is_empty() {
            t.columns.push(Column::primary("id", SqlType::Integer));
            continue;
        }
        if let Some(i) = t.columns.iter().position(|c| is_pk_candidate(&t.name, &c.name)) {
            let mut pk = t.columns.remove(i);
            pk.is_primary_key = true;
            t.columns.insert(0, pk);
        }
    }
    for link in &refs.joins {
        let t =
            tables.iter_mut().find(|t| t.name.eq_ignore_ascii_case(&link.local.0)).expect("join tables are recorded");
        let fk = ForeignKey {
            local_column: link.local.1.clone(),
            ref_table: link.referenced.0.clone(),
            ref_column: link.referenced.1.clone(),
        };
        if !t.foreign_keys.contains(&fk) {
            t.foreign_keys.push(fk);
        }
    }
    Ok(Schema::new(tables))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_sql;
    use crate::schema::fixtures::TABLE1_SQL;

    fn infer(sql: &str) -> Result<Schema, InferError> {
        infer_schema(&parse_sql(sql).unwrap())
    }

    #[test]
    fn table1_inference() {
        let s = infer(TABLE1_SQL).unwrap();
        let expected = Schema::new(vec![
            Table::new(
                "Campaigns",
                vec![Column::primary("CampaignID", SqlType::Integer), Column::new("CampaignName", SqlType::Text)],
            ),
            Table::new(
                "Impressions",
                vec![Column::new("CampaignID", SqlType::Integer), Column::new("Clicks", SqlType::Integer)],
            )
            .with_fk("CampaignID", "Campaigns", "CampaignID"),
        ]);
        assert_eq!(s, expected);
        s.validate().unwrap();
    }

    #[test]
    fn ambiguous_unqualified_column() {
        assert_eq!(
            infer("SELECT a FROM x JOIN y ON x.k = y.k"),
            Err(InferError::AmbiguousColumn { column: "a".into(), candidates: vec!["x".into(), "y".into()] })
        );
    }

    #[test]
    fn qualified_join() {
        let s = infer("SELECT x.a FROM x JOIN y ON x.k = y.k").unwrap();
        let expected = Schema::new(vec![
            Table::new("x", vec![Column::new("a", SqlType::Text), Column::new("k", SqlType::Integer)]),
            Table::new("y", vec![Column::new("k", SqlType::Integer)]).with_fk("k", "x", "k"),
        ]);
        assert_eq!(s, expected);
    }

    #[test]
    fn unresolved_alias() {
        assert_eq!(infer("SELECT q.a FROM t"), Err(InferError::UnresolvedAlias("q".into())));
    }

    #[test]
    fn pk_guess_and_placeholder_column() {
        let s = infer("SELECT count(*) FROM singers").unwrap();
        assert_eq!(s.tables[0].columns, [Column::primary("id", SqlType::Integer)]);
        let s = infer("SELECT name FROM singers WHERE singer_id = 3").unwrap();
        assert_eq!(
            s.tables[0].columns,
            [Column::primary("singer_id", SqlType::Integer), Column::new("name", SqlType::Text)]
        );
        let s = infer("SELECT name FROM categories WHERE CategoryId = 3").unwrap();
        assert!(s.tables[0].columns[0].is_primary_key);
        let s = infer("SELECT name FROM singer WHERE concert_id = 3").unwrap();
        assert!(s.tables[0].columns.iter().all(|c| !c.is_primary_key));
    }

    #[test]
    fn singulars() {
        assert_eq!(singular("Categories"), "category");
        assert_eq!(singular("boxes"), "box");
        assert_eq!(singular("Campaigns"), "campaign");
        assert_eq!(singular("staff"), "staff");
    }
}
