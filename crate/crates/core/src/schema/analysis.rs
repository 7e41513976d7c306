//! Scoped resolution of the tables and columns a statement references.

use std::collections::HashSet;

use crate::ast::{is_numeric_aggregate, ClauseKind, Node, NodeKind, SqlAst, TokenClass};

use super::SqlType;

/// A column reference after alias resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnUse {
    Resolved {
        table: String,
        column: String,
    },
    /// Unqualified name with several base tables in scope.
    Ambiguous {
        column: String,
        candidates: Vec<String>,
    },
}

/// An equality between columns of two different base tables in a JOIN
/// condition. `local` belongs to the joined (right-hand) table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinLink {
    pub local: (String, String),
    pub referenced: (String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct References {
    /// Base tables in first-reference order.
    pub tables: Vec<String>,
    /// Column uses in first-reference order, deduplicated.
    pub columns: Vec<ColumnUse>,
    pub joins: Vec<JoinLink>,
    /// Qualifiers that name no table or alias in scope.
    pub unresolved_aliases: Vec<String>,
    /// Numeric type evidence per (table, column).
    pub numeric: Vec<((String, String), SqlType)>,
}

impl References {
    pub fn numeric_evidence(&self, table: &str, column: &str) -> Option<SqlType> {
        let mut found = None;
        for ((t, c), ty) in &self.numeric {
            if t.eq_ignore_ascii_case(table) && c.eq_ignore_ascii_case(column) {
                if *ty == SqlType::Real {
                    return Some(SqlType::Real);
                }
                found = Some(*ty);
            }
        }
        found
    }

    pub fn in_join(&self, table: &str, column: &str) -> bool {
        let hit = |(t, c): &(String, String)| t.eq_ignore_ascii_case(table) && c.eq_ignore_ascii_case(column);
        self.joins.iter().any(|j| hit(&j.local) || hit(&j.referenced))
    }
}

pub fn analyze_references(sql: &SqlAst) -> References {
    let mut a = Analyzer { refs: References::default() };
    a.statement(&sql.root, &[]);
    a.refs
}

#[derive(Debug, Clone)]
struct ScopeTable {
    /// `None` for a derived table.
    base: Option<String>,
    alias: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    tables: Vec<ScopeTable>,
    select_aliases: HashSet<String>,
}

struct Analyzer {
    refs: References,
}

fn ident_text(n: &Node) -> Option<&str> {
    n.as_token().filter(|t| t.class == TokenClass::Identifier).map(|t| t.text.as_str())
}

fn alias_name(n: &Node) -> Option<&str> {
    n.children()
        .iter()
        .find(|c| c.kind() == Some(NodeKind::Alias))
        .and_then(|a| a.children().get(1))
        .and_then(ident_text)
}

fn is_numeric_literal(n: &Node) -> Option<SqlType> {
    let lit = match n.kind() {
        Some(NodeKind::Unary) => n.children().get(1)?,
        _ => n,
    };
    let t = lit.as_token().filter(|t| t.class == TokenClass::NumericLiteral)?;
    let real = t.text.contains('.') || t.text.contains(['e', 'E']) && !t.text.starts_with("0x");
    Some(if real { SqlType::Real } else { SqlType::Integer })
}

impl Analyzer {
    fn statement(&mut self, stmt: &Node, outer: &[Scope]) {
        let mut scope = Scope::default();
        for c in stmt.children() {
            match c.kind() {
                Some(NodeKind::Clause(ClauseKind::From)) | Some(NodeKind::Clause(ClauseKind::Join)) => {
                    for tr in c.children().iter().filter(|n| n.kind() == Some(NodeKind::TableRef)) {
                        let entry = self.table_ref(tr, outer);
                        scope.tables.push(entry);
                    }
                }
                Some(NodeKind::Clause(ClauseKind::Select)) => {
                    for rc in c.children() {
                        if rc.kind() == Some(NodeKind::Expression) {
                            if let Some(a) = rc.children().last().filter(|n| n.kind() == Some(NodeKind::Alias)) {
                                if let Some(name) = a.children().get(1).and_then(ident_text) {
                                    scope.select_aliases.insert(name.to_ascii_lowercase());
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        let mut stack: Vec<Scope> = outer.to_vec();
        stack.push(scope);
        for c in stmt.children() {
            match c.kind() {
                Some(NodeKind::Clause(ClauseKind::From)) => {}
                Some(NodeKind::Clause(ClauseKind::Join)) => self.join(c, &stack),
                Some(NodeKind::Clause(ClauseKind::Compound)) => {
                    if let Some(rhs) = c.children().iter().find(|n| n.kind() == Some(NodeKind::Statement)) {
                        self.statement(rhs, outer);
                    }
                }
                Some(NodeKind::Clause(_)) => {
                    for e in c.children() {
                        self.expr(e, &stack);
                    }
                }
                _ => {}
            }
        }
    }

    fn table_ref(&mut self, tr: &Node, outer: &[Scope]) -> ScopeTable {
        let alias = alias_name(tr).map(str::to_string);
        let object = &tr.children()[0];
        if let Some(name) = ident_text(object) {
            if !self.refs.tables.iter().any(|t| t.eq_ignore_ascii_case(name)) {
                self.refs.tables.push(name.to_string());
            }
            ScopeTable { base: Some(name.to_string()), alias }
        } else {
            for sub in object.children().iter().filter(|n| n.kind() == Some(NodeKind::Statement)) {
                self.statement(sub, outer);
            }
            ScopeTable { base: None, alias }
        }
    }

    fn join(&mut self, clause: &Node, stack: &[Scope]) {
        let joined = clause
            .children()
            .iter()
            .find(|n| n.kind() == Some(NodeKind::TableRef))
            .and_then(|tr| ident_text(&tr.children()[0]))
            .map(str::to_string);
        let Some(on_pos) = clause.children().iter().position(|n| n.as_token().is_some_and(|t| t.is_keyword("ON")))
        else {
            return;
        };
        let Some(cond) = clause.children().get(on_pos + 1) else { return };
        self.expr(cond, stack);
        let mut conjuncts = Vec::new();
        split_and(cond, &mut conjuncts);
        for eq in conjuncts {
            let ch = eq.children();
            if ch.len() != 3
                || !ch[1]
                    .as_token()
                    .is_some_and(|t| t.class == TokenClass::Operator && (t.text == "=" || t.text == "=="))
            {
                continue;
            }
            let (Some(l), Some(r)) = (self.resolve_quiet(&ch[0], stack), self.resolve_quiet(&ch[2], stack)) else {
                continue;
            };
            if l.0.eq_ignore_ascii_case(&r.0) {
                continue;
            }
            let order = |t: &str| self.refs.tables.iter().position(|x| x.eq_ignore_ascii_case(t)).unwrap_or(0);
            let l_is_local = match &joined {
                Some(j) if l.0.eq_ignore_ascii_case(j) => true,
                Some(j) if r.0.eq_ignore_ascii_case(j) => false,
                _ => order(&l.0) > order(&r.0),
            };
            let link =
                if l_is_local { JoinLink { local: l, referenced: r } } else { JoinLink { local: r, referenced: l } };
            if !self.refs.joins.contains(&link) {
                self.refs.joins.push(link);
            }
        }
    }

    fn expr(&mut self, n: &Node, stack: &[Scope]) {
        match n.kind() {
            None => {}
            Some(NodeKind::ColumnRef) => {
                self.column(n, stack);
            }
            Some(NodeKind::Statement) => self.statement(n, stack),
            Some(NodeKind::Alias) => {}
            Some(NodeKind::FunctionCall) => {
                let numeric = n.children()[0]
                    .as_token()
                    .is_some_and(|t| t.class == TokenClass::FunctionName && is_numeric_aggregate(&t.text));
                if numeric {
                    for arg in n.children().iter().filter(|c| c.kind() == Some(NodeKind::ColumnRef)) {
                        if let Some(key) = self.resolve_quiet(arg, stack) {
                            self.evidence(key, SqlType::Integer);
                        }
                    }
                }
                n.children().iter().for_each(|c| self.expr(c, stack));
            }
            Some(_) => {
                self.comparison_evidence(n, stack);
                n.children().iter().for_each(|c| self.expr(c, stack));
            }
        }
    }

    fn comparison_evidence(&mut self, n: &Node, stack: &[Scope]) {
        let ch = n.children();
        if ch.len() < 3 || ch[0].kind() != Some(NodeKind::ColumnRef) {
            // literal on the left: `5 < x`
            if ch.len() == 3 && ch[1].as_token().is_some_and(|t| t.class == TokenClass::Operator) {
                if let (Some(ty), Some(NodeKind::ColumnRef)) = (is_numeric_literal(&ch[0]), ch[2].kind()) {
                    if let Some(key) = self.resolve_quiet(&ch[2], stack) {
                        self.evidence(key, ty);
                    }
                }
            }
            return;
        }
        let op_at = usize::from(ch[1].as_token().is_some_and(|t| t.is_keyword("NOT"))) + 1;
        let Some(op) = ch.get(op_at).and_then(Node::as_token) else { return };
        let mut ty = None;
        if (op.class == TokenClass::Operator
            && ["=", "==", "!=", "<>", "<", "<=", ">", ">="].contains(&op.text.as_str()))
            || op.is_keyword("BETWEEN")
        {
            ty = ch.get(op_at + 1).and_then(is_numeric_literal);
        } else if op.is_keyword("IN") {
            let items = ch.get(op_at + 1).map(Node::children).unwrap_or(&[]);
            let lits: Vec<SqlType> = items
                .iter()
                .filter(|c| !c.as_token().is_some_and(|t| t.class == TokenClass::Punctuation))
                .filter_map(is_numeric_literal)
                .collect();
            if !lits.is_empty() {
                ty = Some(if lits.contains(&SqlType::Real) { SqlType::Real } else { SqlType::Integer });
            }
        }
        if let Some(ty) = ty {
            if let Some(key) = self.resolve_quiet(&ch[0], stack) {
                self.evidence(key, ty);
            }
        }
    }

    fn evidence(&mut self, key: (String, String), ty: SqlType) {
        if !self.refs.numeric.iter().any(|(k, t)| k == &key && *t == ty) {
            self.refs.numeric.push((key, ty));
        }
    }

    fn column(&mut self, colref: &Node, stack: &[Scope]) {
        match resolve(colref, stack) {
            Resolution::Column(table, column) => self.push_use(ColumnUse::Resolved { table, column }),
            Resolution::Ambiguous(column, candidates) => self.push_use(ColumnUse::Ambiguous { column, candidates }),
            Resolution::UnknownQualifier(q) => {
                if !self.refs.unresolved_aliases.iter().any(|x| x.eq_ignore_ascii_case(&q)) {
                    self.refs.unresolved_aliases.push(q);
                }
            }
            Resolution::Opaque => {}
        }
    }

    fn push_use(&mut self, u: ColumnUse) {
        let same = |a: &ColumnUse| match (a, &u) {
            (ColumnUse::Resolved { table: t1, column: c1 }, ColumnUse::Resolved { table: t2, column: c2 }) => {
                t1.eq_ignore_ascii_case(t2) && c1.eq_ignore_ascii_case(c2)
            }
            (ColumnUse::Ambiguous { column: c1, .. }, ColumnUse::Ambiguous { column: c2, .. }) => {
                c1.eq_ignore_ascii_case(c2)
            }
            _ => false,
        };
        if !self.refs.columns.iter().any(same) {
            self.refs.columns.push(u);
        }
    }

    fn resolve_quiet(&self, colref: &Node, stack: &[Scope]) -> Option<(String, String)> {
        if colref.kind() != Some(NodeKind::ColumnRef) {
            return None;
        }
        match resolve(colref, stack) {
            Resolution::Column(t, c) => Some((t, c)),
            _ => None,
        }
    }
}

fn split_and<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
    let ch = n.children();
    if n.kind() == Some(NodeKind::Expression) && ch.len() == 3 && ch[1].as_token().is_some_and(|t| t.is_keyword("AND"))
    {
        split_and(&ch[0], out);
        split_and(&ch[2], out);
    } else {
        out.push(n);
    }
}

enum Resolution {
    Column(String, String),
    Ambiguous(String, Vec<String>),
    UnknownQualifier(String),
    /// Derived-table column, select alias, `*` or similar: nothing to record.
    Opaque,
}

fn resolve(colref: &Node, stack: &[Scope]) -> Resolution {
    let ch = colref.children();
    if ch.len() == 3 {
        let Some(q) = ident_text(&ch[0]) else { return Resolution::Opaque };
        let col = ident_text(&ch[2]);
        for scope in stack.iter().rev() {
            let by_alias = scope.tables.iter().find(|t| t.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(q)));
            let hit = by_alias
                .or_else(|| scope.tables.iter().find(|t| t.base.as_deref().is_some_and(|b| b.eq_ignore_ascii_case(q))));
            if let Some(t) = hit {
                return match (&t.base, col) {
                    (Some(b), Some(c)) => Resolution::Column(b.clone(), c.to_string()),
                    _ => Resolution::Opaque,
                };
            }
        }
        return Resolution::UnknownQualifier(q.to_string());
    }
    let Some(col) = ch.first().and_then(ident_text) else { return Resolution::Opaque };
    for scope in stack.iter().rev() {
        if scope.select_aliases.contains(&col.to_ascii_lowercase()) {
            return Resolution::Opaque;
        }
        if scope.tables.is_empty() {
            continue;
        }
        let mut bases: Vec<String> = Vec::new();
        for t in &scope.tables {
            if let Some(b) = &t.base {
                if !bases.iter().any(|x| x.eq_ignore_ascii_case(b)) {
                    bases.push(b.clone());
                }
            }
        }
        let derived = scope.tables.iter().any(|t| t.base.is_none());
        return match (bases.len(), derived) {
            (0, _) => Resolution::Opaque,
            (1, false) => Resolution::Column(bases.remove(0), col.to_string()),
            _ => Resolution::Ambiguous(col.to_string(), bases),
        };
    }
    Resolution::Opaque
}
