//! Canonical syntax trees for a SQLite SELECT subset.
//!
//! Every token of a statement is kept as a leaf, in source order, under a small
//! set of structural branch kinds. Rendering is therefore a walk over the
//! leaves, and two statements that render identically parse to identical
//! trees. Templates reuse the same tree with [`Node::Placeholder`] leaves.

mod keywords;
mod lexer;
mod parser;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use keywords::{is_keyword, is_known_function, is_numeric_aggregate, KEYWORD_TABLE_VERSION};
pub use lexer::{is_number_literal, tokenize, LexKind, LexMode, LexToken};
pub(crate) use render::is_plain_identifier;
pub use render::{quote_identifier, render_node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Keyword,
    Identifier,
    NumericLiteral,
    StringLiteral,
    Operator,
    Punctuation,
    Star,
    FunctionName,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub class: TokenClass,
    /// Keywords are upper case; identifiers and strings are stored unquoted.
    pub text: String,
}

impl Token {
    pub fn new(class: TokenClass, text: impl Into<String>) -> Self {
        Self { class, text: text.into() }
    }

    pub fn keyword(text: &str) -> Self {
        Self::new(TokenClass::Keyword, text.to_ascii_uppercase())
    }

    pub fn punct(text: &str) -> Self {
        Self::new(TokenClass::Punctuation, text)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.class == TokenClass::Keyword && self.text == kw
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.class == TokenClass::Punctuation && self.text == p
    }
}

/// What kind of value fills a template placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FillType {
    Table,
    Column,
    Alias,
    NumValue,
    StrValue,
}

impl FillType {
    pub const ALL: [FillType; 5] =
        [FillType::Table, FillType::Column, FillType::Alias, FillType::NumValue, FillType::StrValue];

    /// Rendered spelling inside a template, e.g. `[column]`.
    pub fn marker(self) -> &'static str {
        match self {
            FillType::Table => "[table]",
            FillType::Column => "[column]",
            FillType::Alias => "[alias]",
            FillType::NumValue => "[number]",
            FillType::StrValue => "[string]",
        }
    }

    pub(crate) fn from_marker_inner(inner: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|ft| &ft.marker()[1..ft.marker().len() - 1] == inner)
    }

    pub fn is_identifier(self) -> bool {
        matches!(self, FillType::Table | FillType::Column | FillType::Alias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    Select,
    From,
    Join,
    Where,
    GroupBy,
    Having,
    Compound,
    OrderBy,
    Limit,
}

impl ClauseKind {
    /// Clause kinds eligible for template crossover.
    pub const CROSSOVER: [ClauseKind; 5] =
        [ClauseKind::Where, ClauseKind::GroupBy, ClauseKind::Having, ClauseKind::OrderBy, ClauseKind::Limit];

    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKind::Select => "SELECT",
            ClauseKind::From => "FROM",
            ClauseKind::Join => "JOIN",
            ClauseKind::Where => "WHERE",
            ClauseKind::GroupBy => "GROUP BY",
            ClauseKind::Having => "HAVING",
            ClauseKind::Compound => "UNION/INTERSECT/EXCEPT",
            ClauseKind::OrderBy => "ORDER BY",
            ClauseKind::Limit => "LIMIT",
        }
    }

    pub fn from_keyword(text: &str) -> Option<Self> {
        let norm = text.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_uppercase();
        [
            ClauseKind::Select,
            ClauseKind::From,
            ClauseKind::Join,
            ClauseKind::Where,
            ClauseKind::GroupBy,
            ClauseKind::Having,
            ClauseKind::OrderBy,
            ClauseKind::Limit,
        ]
        .into_iter()
        .find(|k| k.keyword() == norm)
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Statement,
    Clause(ClauseKind),
    /// Generic composite expression: binary operation, parenthesised group,
    /// IN list, CASE, BETWEEN and so on.
    Expression,
    /// Prefix operator applied to one operand, such as unary minus.
    Unary,
    FunctionCall,
    /// Object in FROM/JOIN position: a table name or a parenthesised subquery,
    /// optionally followed by an [`NodeKind::Alias`].
    TableRef,
    /// `name`, `qualifier.name` or `qualifier.*`.
    ColumnRef,
    /// `AS name`; AS is always present in canonical form.
    Alias,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub kind: NodeKind,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Branch(Branch),
    Leaf(Token),
    Placeholder(FillType),
}

impl Node {
    pub fn branch(kind: NodeKind, children: Vec<Node>) -> Self {
        Node::Branch(Branch { kind, children })
    }

    pub fn leaf(class: TokenClass, text: impl Into<String>) -> Self {
        Node::Leaf(Token::new(class, text))
    }

    pub fn kind(&self) -> Option<NodeKind> {
        match self {
            Node::Branch(b) => Some(b.kind),
            _ => None,
        }
    }

    pub fn children(&self) -> &[Node] {
        match self {
            Node::Branch(b) => &b.children,
            _ => &[],
        }
    }

    pub fn as_token(&self) -> Option<&Token> {
        match self {
            Node::Leaf(t) => Some(t),
            _ => None,
        }
    }

    /// Leaves (tokens and placeholders) in pre-order.
    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Branch(b) => b.children.iter().for_each(|c| c.collect_leaves(out)),
            leaf => out.push(leaf),
        }
    }

    /// Top-level clause of the given kind, when `self` is a statement.
    pub fn clause(&self, kind: ClauseKind) -> Option<&Node> {
        self.children().iter().find(|c| c.kind() == Some(NodeKind::Clause(kind)))
    }
}

/// Parsed form of one SELECT statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SqlAst {
    pub root: Node,
}

impl SqlAst {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.root.leaves().into_iter().filter_map(Node::as_token)
    }

    pub fn clause_kinds(&self) -> Vec<ClauseKind> {
        self.root
            .children()
            .iter()
            .filter_map(|c| match c.kind() {
                Some(NodeKind::Clause(k)) => Some(k),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for SqlAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_node(&self.root))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    pub fn new(offset: usize, expected: &str, found: &str) -> Self {
        Self { offset, expected: expected.to_string(), found: found.to_string() }
    }
}

/// Parses one SELECT statement (optionally `;`-terminated) into its canonical tree.
pub fn parse_sql(sql: &str) -> Result<SqlAst, ParseError> {
    parser::parse_statement_text(sql, LexMode::Sql).map(|root| SqlAst { root })
}

/// Parses rendered template text, where `[table]`, `[column]`, ... are placeholders.
pub fn parse_template_text(text: &str) -> Result<Node, ParseError> {
    parser::parse_statement_text(text, LexMode::Template)
}

/// Canonical single-line rendering.
pub fn render_sql(ast: &SqlAst) -> String {
    render_node(&ast.root)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1_SQL: &str = "SELECT C.CampaignName FROM Campaigns AS C JOIN Impressions AS I ON C.CampaignID = I.CampaignID GROUP BY C.CampaignName ORDER BY SUM(I.Clicks) DESC LIMIT 10";

    #[test]
    fn minimal_statement_shape() {
        let ast = parse_sql("select name from users").unwrap();
        assert_eq!(ast.clause_kinds(), [ClauseKind::Select, ClauseKind::From]);
        let select = ast.root.clause(ClauseKind::Select).unwrap();
        assert_eq!(
            select.children()[1],
            Node::branch(NodeKind::ColumnRef, vec![Node::leaf(TokenClass::Identifier, "name")])
        );
        let from = ast.root.clause(ClauseKind::From).unwrap();
        assert_eq!(
            from.children()[1],
            Node::branch(NodeKind::TableRef, vec![Node::leaf(TokenClass::Identifier, "users")])
        );
    }

    #[test]
    fn table1_has_six_clauses() {
        let ast = parse_sql(TABLE1_SQL).unwrap();
        assert_eq!(
            ast.clause_kinds(),
            [
                ClauseKind::Select,
                ClauseKind::From,
                ClauseKind::Join,
                ClauseKind::GroupBy,
                ClauseKind::OrderBy,
                ClauseKind::Limit
            ]
        );
    }

    #[test]
    fn table1_renders_byte_identical() {
        assert_eq!(render_sql(&parse_sql(TABLE1_SQL).unwrap()), TABLE1_SQL);
        let lowered = "select C.CampaignName from Campaigns as C join Impressions as I on C.CampaignID = I.CampaignID group by C.CampaignName order by sum(I.Clicks) desc limit 10";
        assert_eq!(render_sql(&parse_sql(lowered).unwrap()), TABLE1_SQL);
    }

    #[test]
    fn whitespace_normalization() {
        assert_eq!(render_sql(&parse_sql("select  name\nfrom users").unwrap()), "SELECT name FROM users");
    }

    #[test]
    fn malformed_reports_offset() {
        let err = parse_sql("SELECT FROM WHERE").unwrap_err();
        assert_eq!(err.offset, 7);
        assert_eq!(err.expected, "expression");
    }

    #[test]
    fn identifier_case_preserved_keywords_upper() {
        let ast = parse_sql("Select Singer.Name From Singer").unwrap();
        assert_eq!(ast.to_string(), "SELECT Singer.Name FROM Singer");
    }

    #[test]
    fn placeholder_markers() {
        for ft in FillType::ALL {
            let inner = &ft.marker()[1..ft.marker().len() - 1];
            assert_eq!(FillType::from_marker_inner(inner), Some(ft));
        }
        assert_eq!(FillType::from_marker_inner("Table"), None);
    }

    #[test]
    fn clause_keyword_lookup() {
        assert_eq!(ClauseKind::from_keyword("order  by"), Some(ClauseKind::OrderBy));
        assert_eq!(ClauseKind::from_keyword("WHERE"), Some(ClauseKind::Where));
        assert_eq!(ClauseKind::from_keyword("QUALIFY"), None);
    }
}
