//! CREATE TABLE rendering and a lenient reader for DDL written by people or
//! models.

use crate::ast::{tokenize, LexKind, LexMode, LexToken};

use crate::ast::is_plain_identifier;

use super::{Column, ForeignKey, Schema, SchemaError, SqlType, Table};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DdlError {
    #[error("no CREATE TABLE statement found")]
    NoStatements,
    #[error("DDL syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax { offset: usize, expected: String, found: String },
    #[error("REFERENCES {table} without a column, and {table} has no single-column primary key")]
    UnresolvedReference { table: String },
    #[error("invalid schema: {0}")]
    Invalid(#[from] SchemaError),
}

/// DDL names are quoted only when they are not plain words. Reserved words
/// stay bare, so a table called `order` fails when the DDL is applied.
fn ddl_name(name: &str) -> String {
    if is_plain_identifier(name) {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

/// One `CREATE TABLE` per table, columns indented four spaces, foreign keys
/// after the columns, statements separated by a newline.
pub fn render_ddl(schema: &Schema) -> String {
    let mut out = Vec::new();
    for t in &schema.tables {
        let mut items: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let pk = if c.is_primary_key { " PRIMARY KEY" } else { "" };
                format!("    {} {}{}", ddl_name(&c.name), c.declared_type, pk)
            })
            .collect();
        for fk in &t.foreign_keys {
            items.push(format!(
                "    FOREIGN KEY({}) REFERENCES {}({})",
                ddl_name(&fk.local_column),
                ddl_name(&fk.ref_table),
                ddl_name(&fk.ref_column)
            ));
        }
        out.push(format!("CREATE TABLE {}(\n{}\n);", ddl_name(&t.name), items.join(",\n")));
    }
    out.join("\n")
}

/// Reads every `CREATE TABLE` statement in `text`, ignoring code fences and
/// any prose around the statements. Types map by SQLite affinity; composite
/// keys, UNIQUE, CHECK and similar constraints are accepted and dropped. A
/// missing comma before a table constraint is tolerated.
pub fn read_ddl(text: &str) -> Result<Schema, DdlError> {
    let mut tables = Vec::new();
    let mut pending_refs = Vec::new();
    for (start, stmt) in statements(text) {
        let toks = tokenize(stmt, LexMode::Ddl).map_err(|e| DdlError::Syntax {
            offset: start + e.offset,
            expected: e.expected,
            found: e.found,
        })?;
        let mut r = Reader { toks, pos: 0, base: start, end: start + stmt.len() };
        let (table, refs) = r.create_table()?;
        pending_refs.extend(refs.into_iter().map(|(col, rt)| (table.name.clone(), col, rt)));
        tables.push(table);
    }
    if tables.is_empty() {
        return Err(DdlError::NoStatements);
    }
    let mut schema = Schema::new(tables);
    for (table, col, ref_table) in pending_refs {
        let pk = schema
            .table(&ref_table)
            .and_then(|t| t.primary_key())
            .map(|c| c.name.clone())
            .ok_or(DdlError::UnresolvedReference { table: ref_table.clone() })?;
        let t = schema.tables.iter_mut().find(|t| t.name == table).expect("table just read");
        if let Some(fk) = t.foreign_keys.iter_mut().find(|fk| fk.local_column == col && fk.ref_column.is_empty()) {
            fk.ref_column = pk;
        }
    }
    schema.validate()?;
    Ok(schema)
}

/// Byte ranges from each `CREATE` keyword through the matching close paren
/// of its column list.
fn statements(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(found) = find_create(text, i) {
        let mut depth = 0usize;
        let mut j = found;
        let mut end = None;
        while j < bytes.len() {
            match bytes[j] {
                q @ (b'\'' | b'"' | b'`') => {
                    j += 1;
                    while j < bytes.len() && bytes[j] != q {
                        j += 1;
                    }
                }
                b'[' => {
                    while j < bytes.len() && bytes[j] != b']' {
                        j += 1;
                    }
                }
                b'(' => depth += 1,
                b')' => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        end = Some(j + 1);
                        break;
                    }
                }
                b';' if depth == 0 => break,
                _ => {}
            }
            j += 1;
        }
        match end {
            Some(e) => {
                out.push((found, &text[found..e]));
                i = e;
            }
            // Unterminated: hand the rest to the tokenizer for a positioned error.
            None => {
                out.push((found, &text[found..]));
                break;
            }
        }
    }
    out
}

fn find_create(text: &str, from: usize) -> Option<usize> {
    let lower = text.to_ascii_lowercase();
    let mut at = from;
    while let Some(rel) = lower.get(at..)?.find("create") {
        let p = at + rel;
        let before_ok = p == 0 || !is_word_byte(lower.as_bytes()[p - 1]);
        let after_ok = lower.as_bytes().get(p + 6).is_none_or(|b| !is_word_byte(*b));
        let rest = lower[p + 6..].trim_start();
        let next_is_table = ["table", "temp", "temporary"]
            .iter()
            .any(|w| rest.starts_with(w) && rest.as_bytes().get(w.len()).is_none_or(|b| !is_word_byte(*b)));
        if before_ok && after_ok && next_is_table {
            return Some(p);
        }
        at = p + 6;
    }
    None
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

const TABLE_CONSTRAINTS: &[&str] = &["CONSTRAINT", "PRIMARY", "FOREIGN", "UNIQUE", "CHECK"];
const COLUMN_CONSTRAINTS: &[&str] =
    &["CONSTRAINT", "PRIMARY", "NOT", "NULL", "UNIQUE", "CHECK", "DEFAULT", "COLLATE", "REFERENCES", "GENERATED", "AS"];

struct Reader {
    toks: Vec<LexToken>,
    pos: usize,
    base: usize,
    end: usize,
}

impl Reader {
    fn peek(&self) -> Option<&LexToken> {
        self.toks.get(self.pos)
    }

    fn error(&self, expected: &str) -> DdlError {
        match self.peek() {
            Some(t) => {
                DdlError::Syntax { offset: self.base + t.offset, expected: expected.into(), found: t.describe() }
            }
            None => DdlError::Syntax { offset: self.end, expected: expected.into(), found: "end of input".into() },
        }
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(w))
    }

    fn at_any(&self, words: &[&str]) -> bool {
        words.iter().any(|w| self.at_word(w))
    }

    fn at_symbol(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_symbol(s))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let hit = self.at_word(w);
        self.pos += usize::from(hit);
        hit
    }

    fn expect_word(&mut self, w: &str) -> Result<(), DdlError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.error(w))
        }
    }

    fn eat_symbol(&mut self, s: &str) -> bool {
        let hit = self.at_symbol(s);
        self.pos += usize::from(hit);
        hit
    }

    fn expect_symbol(&mut self, s: &str) -> Result<(), DdlError> {
        if self.eat_symbol(s) {
            Ok(())
        } else {
            Err(self.error(&format!("`{s}`")))
        }
    }

    fn name(&mut self, what: &str) -> Result<String, DdlError> {
        match self.peek() {
            Some(t) if matches!(t.kind, LexKind::Word | LexKind::QuotedIdent | LexKind::Str) => {
                let s = t.text.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(what)),
        }
    }

    /// Possibly schema-qualified name; the qualifier is dropped.
    fn object_name(&mut self) -> Result<String, DdlError> {
        let mut n = self.name("table name")?;
        if self.eat_symbol(".") {
            n = self.name("table name")?;
        }
        Ok(n)
    }

    fn skip_parens(&mut self) -> Result<(), DdlError> {
        self.expect_symbol("(")?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                None => return Err(self.error("`)`")),
                Some(t) if t.is_symbol("(") => depth += 1,
                Some(t) if t.is_symbol(")") => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn name_list(&mut self) -> Result<Vec<String>, DdlError> {
        self.expect_symbol("(")?;
        let mut names = vec![self.name("column name")?];
        self.skip_order_words();
        while self.eat_symbol(",") {
            names.push(self.name("column name")?);
            self.skip_order_words();
        }
        self.expect_symbol(")")?;
        Ok(names)
    }

    fn skip_order_words(&mut self) {
        while self.eat_word("ASC") || self.eat_word("DESC") {}
        if self.eat_word("COLLATE") {
            self.pos += 1;
        }
    }

    /// `ON DELETE ...`, `MATCH x`, `DEFERRABLE ...` after a REFERENCES clause.
    fn skip_fk_actions(&mut self) {
        loop {
            if self.eat_word("ON") {
                self.pos += 1;
                let _ = self.eat_word("SET") || self.eat_word("NO");
                self.pos += 1;
            } else if self.eat_word("MATCH") {
                self.pos += 1;
            } else if self.at_word("NOT") && self.toks.get(self.pos + 1).is_some_and(|t| t.is_word("DEFERRABLE")) {
                self.pos += 2;
            } else if self.eat_word("DEFERRABLE") {
                if self.eat_word("INITIALLY") {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Table name and column, column left empty when omitted.
    fn references(&mut self) -> Result<(String, Option<Vec<String>>), DdlError> {
        self.expect_word("REFERENCES")?;
        let t = self.object_name()?;
        let cols = if self.at_symbol("(") { Some(self.name_list()?) } else { None };
        self.skip_fk_actions();
        Ok((t, cols))
    }

    fn skip_conflict_clause(&mut self) {
        if self.at_word("ON") && self.toks.get(self.pos + 1).is_some_and(|t| t.is_word("CONFLICT")) {
            self.pos += 3;
        }
    }

    fn create_table(&mut self) -> Result<(Table, Vec<(String, String)>), DdlError> {
        self.expect_word("CREATE")?;
        let _ = self.eat_word("TEMP") || self.eat_word("TEMPORARY");
        self.expect_word("TABLE")?;
        if self.eat_word("IF") {
            self.expect_word("NOT")?;
            self.expect_word("EXISTS")?;
        }
        let mut table = Table::new(self.object_name()?, Vec::new());
        let mut implicit_refs = Vec::new();
        self.expect_symbol("(")?;
        loop {
            if self.at_any(TABLE_CONSTRAINTS) {
                self.table_constraint(&mut table, &mut implicit_refs)?;
            } else {
                self.column_def(&mut table, &mut implicit_refs)?;
            }
            if self.eat_symbol(",") {
                continue;
            }
            if self.eat_symbol(")") {
                break;
            }
            if self.at_any(TABLE_CONSTRAINTS) {
                continue;
            }
            return Err(self.error("`,` or `)`"));
        }
        Ok((table, implicit_refs))
    }

    fn column_def(&mut self, table: &mut Table, refs: &mut Vec<(String, String)>) -> Result<(), DdlError> {
        let name = self.name("column name")?;
        let mut decl = Vec::new();
        while let Some(t) = self.peek() {
            if t.kind != LexKind::Word || self.at_any(COLUMN_CONSTRAINTS) || self.at_word("FOREIGN") {
                break;
            }
            decl.push(t.text.clone());
            self.pos += 1;
        }
        if self.at_symbol("(") {
            self.skip_parens()?;
        }
        let mut col = Column::new(name, SqlType::from_declared(&decl.join(" ")));
        loop {
            if self.eat_word("CONSTRAINT") {
                self.name("constraint name")?;
            } else if self.eat_word("PRIMARY") {
                self.expect_word("KEY")?;
                col.is_primary_key = true;
                self.skip_order_words();
                self.skip_conflict_clause();
                self.eat_word("AUTOINCREMENT");
            } else if self.eat_word("NOT") {
                self.expect_word("NULL")?;
                self.skip_conflict_clause();
            } else if self.eat_word("NULL") {
            } else if self.eat_word("UNIQUE") {
                self.skip_conflict_clause();
            } else if self.at_word("CHECK") {
                self.pos += 1;
                self.skip_parens()?;
            } else if self.eat_word("DEFAULT") {
                if self.at_symbol("(") {
                    self.skip_parens()?;
                } else {
                    let _ = self.eat_symbol("-") || self.eat_symbol("+");
                    if self.peek().is_none() {
                        return Err(self.error("default value"));
                    }
                    self.pos += 1;
                }
            } else if self.eat_word("COLLATE") {
                self.name("collation name")?;
            } else if self.eat_word("GENERATED") || self.at_word("AS") {
                let _ = self.eat_word("ALWAYS");
                self.expect_word("AS")?;
                self.skip_parens()?;
                let _ = self.eat_word("STORED") || self.eat_word("VIRTUAL");
            } else if self.at_word("REFERENCES") {
                let (rt, cols) = self.references()?;
                let ref_column = match cols {
                    Some(c) if c.len() == 1 => c[0].clone(),
                    Some(_) => continue,
                    None => {
                        refs.push((col.name.clone(), rt.clone()));
                        String::new()
                    }
                };
                table.foreign_keys.push(ForeignKey { local_column: col.name.clone(), ref_table: rt, ref_column });
            } else {
                break;
            }
        }
        table.columns.push(col);
        Ok(())
    }

    fn table_constraint(&mut self, table: &mut Table, refs: &mut Vec<(String, String)>) -> Result<(), DdlError> {
        if self.eat_word("CONSTRAINT") {
            self.name("constraint name")?;
        }
        if self.eat_word("PRIMARY") {
            self.expect_word("KEY")?;
            let cols = self.name_list()?;
            self.skip_conflict_clause();
            if let [only] = cols.as_slice() {
                match table.columns.iter_mut().find(|c| c.name.eq_ignore_ascii_case(only)) {
                    Some(c) => c.is_primary_key = true,
                    None => return Err(self.error(&format!("declared column {only}"))),
                }
            }
        } else if self.eat_word("UNIQUE") {
            self.name_list()?;
            self.skip_conflict_clause();
        } else if self.eat_word("CHECK") {
            self.skip_parens()?;
        } else if self.eat_word("FOREIGN") {
            self.expect_word("KEY")?;
            let locals = self.name_list()?;
            let (rt, cols) = self.references()?;
            if let [local] = locals.as_slice() {
                let ref_column = match cols {
                    Some(c) if c.len() == 1 => c[0].clone(),
                    Some(_) => return Ok(()),
                    None => {
                        refs.push((local.clone(), rt.clone()));
                        String::new()
                    }
                };
                table.foreign_keys.push(ForeignKey { local_column: local.clone(), ref_table: rt, ref_column });
            }
        } else {
            return Err(self.error("table constraint"));
        }
        Ok(())
    }
}
