//! SQL templates: statement skeletons whose identifiers and literals are typed
//! placeholders.

mod crossover;
mod pool;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{
    is_number_literal, parse_template_text, render_node, ClauseKind, FillType, Node, NodeKind, ParseError, SqlAst,
    TokenClass,
};

pub use crossover::{crossover, random_crossovers, CrossoverError, CrossoverStats};
pub use pool::{enrich_pool, PoolError, PoolRecord, TemplatePool};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Crossover { parents: [String; 2], clause: ClauseKind },
}

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub skeleton: Node,
    pub provenance: Provenance,
}

impl PartialEq for Template {
    /// Structural equality; provenance is bookkeeping.
    fn eq(&self, other: &Self) -> bool {
        self.skeleton == other.skeleton
    }
}

impl Eq for Template {}

impl Template {
    pub fn from_skeleton(skeleton: Node, provenance: Provenance) -> Self {
        let id = template_id(&render_node(&skeleton));
        Self { id, skeleton, provenance }
    }

    /// Parses rendered template text such as `SELECT [column] FROM [table]`.
    pub fn parse(text: &str, provenance: Provenance) -> Result<Self, ParseError> {
        parse_template_text(text).map(|skeleton| Self::from_skeleton(skeleton, provenance))
    }

    pub fn render(&self) -> String {
        render_node(&self.skeleton)
    }

    /// Placeholder fill types in ordinal (pre-order) order.
    pub fn placeholders(&self) -> Vec<FillType> {
        self.skeleton
            .leaves()
            .into_iter()
            .filter_map(|n| match n {
                Node::Placeholder(ft) => Some(*ft),
                _ => None,
            })
            .collect()
    }

    pub fn has_clause(&self, kind: ClauseKind) -> bool {
        self.skeleton.clause(kind).is_some()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// First 16 hex digits of the SHA-256 of the canonical template text.
pub fn template_id(rendered: &str) -> String {
    let digest = Sha256::digest(rendered.as_bytes());
    hex::encode(&digest[..8])
}

/// Replaces identifier and literal leaves with typed placeholders.
pub fn templatize(ast: &SqlAst) -> Template {
    templatize_with_bindings(ast).0
}

/// Like [`templatize`], also returning the replaced leaf values in ordinal order.
pub fn templatize_with_bindings(ast: &SqlAst) -> (Template, Vec<String>) {
    let aliases = defined_aliases(&ast.root);
    let mut bindings = Vec::new();
    let skeleton = abstract_node(&ast.root, None, &aliases, &mut bindings);
    (Template::from_skeleton(skeleton, Provenance::Seed), bindings)
}

/// True iff the statement's skeleton equals the template's, fill types included.
pub fn matches_template(sql: &SqlAst, t: &Template) -> bool {
    let aliases = defined_aliases(&sql.root);
    abstract_node(&sql.root, None, &aliases, &mut Vec::new()) == t.skeleton
}

fn defined_aliases(root: &Node) -> HashSet<String> {
    fn walk(node: &Node, out: &mut HashSet<String>) {
        if let Node::Branch(b) = node {
            if b.kind == NodeKind::Alias {
                if let Some(Node::Leaf(t)) = b.children.get(1) {
                    out.insert(t.text.to_ascii_lowercase());
                }
            }
            b.children.iter().for_each(|c| walk(c, out));
        }
    }
    let mut out = HashSet::new();
    walk(root, &mut out);
    out
}

fn abstract_node(node: &Node, slot: Option<FillType>, aliases: &HashSet<String>, bindings: &mut Vec<String>) -> Node {
    match node {
        Node::Leaf(tok) => {
            let fill = match tok.class {
                TokenClass::Identifier => Some(slot.unwrap_or(FillType::Column)),
                TokenClass::NumericLiteral => Some(FillType::NumValue),
                TokenClass::StringLiteral => Some(FillType::StrValue),
                _ => None,
            };
            match fill {
                Some(ft) => {
                    bindings.push(tok.text.clone());
                    Node::Placeholder(ft)
                }
                None => node.clone(),
            }
        }
        Node::Placeholder(_) => node.clone(),
        Node::Branch(b) => {
            let qualified = b.kind == NodeKind::ColumnRef && b.children.len() == 3;
            let children = b
                .children
                .iter()
                .enumerate()
                .map(|(i, child)| {
                    let slot = match (b.kind, i) {
                        (NodeKind::TableRef, 0) => Some(FillType::Table),
                        (NodeKind::Alias, 1) => Some(FillType::Alias),
                        (NodeKind::ColumnRef, 0) if qualified => Some(qualifier_type(child, aliases)),
                        (NodeKind::ColumnRef, _) => Some(FillType::Column),
                        _ => None,
                    };
                    abstract_node(child, slot, aliases, bindings)
                })
                .collect();
            Node::branch(b.kind, children)
        }
    }
}

fn qualifier_type(qualifier: &Node, aliases: &HashSet<String>) -> FillType {
    match qualifier {
        Node::Leaf(t) if aliases.contains(&t.text.to_ascii_lowercase()) => FillType::Alias,
        _ => FillType::Table,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FillError {
    #[error("template has {expected} placeholders but {got} bindings were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("binding {value:?} at ordinal {ordinal} is not a valid {fill_type:?}")]
    TypeMismatch { ordinal: usize, fill_type: FillType, value: String },
}

/// Substitutes placeholders in ordinal order. Identifier values that are not
/// plain words are accepted and rendered quoted.
pub fn fill_template<S: AsRef<str>>(t: &Template, bindings: &[S]) -> Result<SqlAst, FillError> {
    let slots = t.placeholders();
    if slots.len() != bindings.len() {
        return Err(FillError::ArityMismatch { expected: slots.len(), got: bindings.len() });
    }
    for (ordinal, (ft, value)) in slots.iter().zip(bindings).enumerate() {
        let value = value.as_ref();
        let ok = match ft {
            FillType::NumValue => is_number_literal(value),
            FillType::StrValue => true,
            _ => !value.is_empty() && !value.chars().any(char::is_control),
        };
        if !ok {
            return Err(FillError::TypeMismatch { ordinal, fill_type: *ft, value: value.to_string() });
        }
    }
    let mut values = bindings.iter().map(AsRef::as_ref);
    Ok(SqlAst { root: substitute(&t.skeleton, &mut values) })
}

fn substitute<'a>(node: &Node, values: &mut impl Iterator<Item = &'a str>) -> Node {
    match node {
        Node::Placeholder(ft) => {
            let v = values.next().expect("arity checked");
            let class = match ft {
                FillType::NumValue => TokenClass::NumericLiteral,
                FillType::StrValue => TokenClass::StringLiteral,
                _ => TokenClass::Identifier,
            };
            Node::leaf(class, v)
        }
        Node::Branch(b) => Node::branch(b.kind, b.children.iter().map(|c| substitute(c, values)).collect()),
        leaf => leaf.clone(),
    }
}

/// Checks that a skeleton is a valid template: no identifier or literal
/// leaves, its rendering re-parses to itself, and filling it yields a
/// statement that templatizes back to it (so every `[alias]` reference has an
/// alias definition to bind to).
pub fn check_template_invariants(skeleton: &Node) -> Result<(), String> {
    for leaf in skeleton.leaves() {
        if let Node::Leaf(t) = leaf {
            if matches!(t.class, TokenClass::Identifier | TokenClass::NumericLiteral | TokenClass::StringLiteral) {
                return Err(format!("skeleton keeps a {:?} leaf {:?}", t.class, t.text));
            }
        }
    }
    let text = render_node(skeleton);
    match parse_template_text(&text) {
        Ok(reparsed) if &reparsed == skeleton => {}
        Ok(_) => return Err(format!("`{text}` re-parses to a different tree")),
        Err(e) => return Err(format!("`{text}` does not re-parse: {e}")),
    }
    let probe = Template::from_skeleton(skeleton.clone(), Provenance::Seed);
    let filled = fill_template(&probe, &probe_bindings(&probe)).map_err(|e| e.to_string())?;
    if !matches_template(&filled, &probe) {
        return Err(format!("`{text}` is not a fixed point of fill/templatize"));
    }
    Ok(())
}

/// One representative value per fill type; all aliases share one name.
fn probe_bindings(t: &Template) -> Vec<&'static str> {
    t.placeholders()
        .into_iter()
        .map(|ft| match ft {
            FillType::Table => "t",
            FillType::Column => "c",
            FillType::Alias => "a",
            FillType::NumValue => "1",
            FillType::StrValue => "s",
        })
        .collect()
}
