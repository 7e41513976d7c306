//! Deterministic single-line rendering.

use super::keywords::is_keyword;
use super::{Node, NodeKind, Token, TokenClass};

struct Piece {
    text: String,
    tight_before: bool,
    tight_after: bool,
}

pub fn render_node(node: &Node) -> String {
    let mut pieces = Vec::new();
    flatten(node, &mut pieces);
    let mut out = String::new();
    let mut prev_tight = true;
    for p in pieces {
        if !prev_tight && !p.tight_before {
            out.push(' ');
        }
        out.push_str(&p.text);
        prev_tight = p.tight_after;
    }
    out
}

fn flatten(node: &Node, out: &mut Vec<Piece>) {
    match node {
        Node::Leaf(tok) => out.push(leaf_piece(tok)),
        Node::Placeholder(ft) => {
            out.push(Piece { text: ft.marker().to_string(), tight_before: false, tight_after: false })
        }
        Node::Branch(b) => {
            for (i, child) in b.children.iter().enumerate() {
                let start = out.len();
                flatten(child, out);
                match b.kind {
                    // name( with no gap
                    NodeKind::FunctionCall if i == 1 => out[start].tight_before = true,
                    NodeKind::Unary if i == 0 && matches!(child, Node::Leaf(t) if t.class == TokenClass::Operator) => {
                        out[start].tight_after = true
                    }
                    _ => {}
                }
            }
        }
    }
}

fn leaf_piece(tok: &Token) -> Piece {
    let text = match tok.class {
        TokenClass::Identifier => quote_identifier(&tok.text),
        TokenClass::StringLiteral => format!("'{}'", tok.text.replace('\'', "''")),
        _ => tok.text.clone(),
    };
    let (tight_before, tight_after) = if tok.class == TokenClass::Punctuation {
        match tok.text.as_str() {
            "," | ")" => (true, false),
            "(" => (false, true),
            "." => (true, true),
            _ => (false, false),
        }
    } else {
        (false, false)
    };
    Piece { text, tight_before, tight_after }
}

/// Bare when the name is a plain non-reserved word, backtick-quoted otherwise.
pub fn quote_identifier(name: &str) -> String {
    if is_plain_identifier(name) && !is_keyword(name) {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

pub(crate) fn is_plain_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_quoting() {
        assert_eq!(quote_identifier("name"), "name");
        assert_eq!(quote_identifier("order"), "`order`");
        assert_eq!(quote_identifier("County Name"), "`County Name`");
        assert_eq!(quote_identifier("a`b"), "`a``b`");
        assert_eq!(quote_identifier("18"), "`18`");
    }
}
