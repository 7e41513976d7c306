//! The four synthesis prompts and their slot filling.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{render_sql, SqlAst};
use crate::schema::{render_ddl, Schema};
use crate::template::Template;

pub const PROMPT_SET_VERSION: &str = "v1";

/// Most recent domain names listed in an exploration prompt.
pub const MAX_LISTED_DOMAINS: usize = 200;

const EXPLORE: &str = include_str!("../prompts/v1/explore.txt");
const GENERATE_SQL: &str = include_str!("../prompts/v1/generate_sql.txt");
const GENERATE_SCHEMA: &str = include_str!("../prompts/v1/generate_schema.txt");
const REVERSE_TRANSLATE: &str = include_str!("../prompts/v1/reverse_translate.txt");
const EXPLORE_EXAMPLES: &str = include_str!("../prompts/v1/examples/explore.txt");
const GENERATE_SQL_EXAMPLES: &str = include_str!("../prompts/v1/examples/generate_sql.txt");
const GENERATE_SCHEMA_EXAMPLES: &str = include_str!("../prompts/v1/examples/generate_schema.txt");
const REVERSE_TRANSLATE_EXAMPLES: &str = include_str!("../prompts/v1/examples/reverse_translate.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Explore,
    GenerateSql,
    GenerateSchema,
    ReverseTranslate,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] =
        [PromptKind::Explore, PromptKind::GenerateSql, PromptKind::GenerateSchema, PromptKind::ReverseTranslate];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Explore => "explore",
            PromptKind::GenerateSql => "generate_sql",
            PromptKind::GenerateSchema => "generate_schema",
            PromptKind::ReverseTranslate => "reverse_translate",
        }
    }

    /// Raw prompt text with `{slot}` markers.
    pub fn template_text(self) -> &'static str {
        match self {
            PromptKind::Explore => EXPLORE,
            PromptKind::GenerateSql => GENERATE_SQL,
            PromptKind::GenerateSchema => GENERATE_SCHEMA,
            PromptKind::ReverseTranslate => REVERSE_TRANSLATE,
        }
    }

    pub fn examples(self) -> &'static str {
        match self {
            PromptKind::Explore => EXPLORE_EXAMPLES,
            PromptKind::GenerateSql => GENERATE_SQL_EXAMPLES,
            PromptKind::GenerateSchema => GENERATE_SCHEMA_EXAMPLES,
            PromptKind::ReverseTranslate => REVERSE_TRANSLATE_EXAMPLES,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub kind: PromptKind,
    pub filled_text: String,
    pub slots: BTreeMap<String, String>,
}

impl PromptRequest {
    /// Content hash of the filled text; slot metadata is not included.
    pub fn hash(&self) -> String {
        prompt_hash(&self.filled_text)
    }
}

pub fn prompt_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("domain_count must be 1, 2 or 3, got {0}")]
    DomainCountOutOfRange(u32),
    #[error("no value for slot {{{0}}}")]
    MissingSlot(String),
}

/// Replaces each `{name}` marker with its slot value in one left-to-right
/// pass, so braces inside values are never treated as markers.
pub fn fill_slots(text: &str, slots: &BTreeMap<String, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                let name = &after[..close];
                let value = slots.get(name).ok_or_else(|| PromptError::MissingSlot(name.to_string()))?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

fn build(kind: PromptKind, mut slots: BTreeMap<String, String>) -> Result<PromptRequest, PromptError> {
    slots.insert("examples".into(), kind.examples().trim_end().to_string());
    let filled_text = fill_slots(kind.template_text().trim_end(), &slots)?;
    Ok(PromptRequest { kind, filled_text, slots })
}

fn slots<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Comma-joined list of the most recent names, or `(none)`.
pub fn render_domain_list<S: AsRef<str>>(names: &[S]) -> String {
    if names.is_empty() {
        return "(none)".into();
    }
    let start = names.len().saturating_sub(MAX_LISTED_DOMAINS);
    names[start..].iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ")
}

pub fn explore_prompt<S: AsRef<str>>(
    explored: &[S],
    t: &Template,
    domain_count: u32,
) -> Result<PromptRequest, PromptError> {
    if !(1..=3).contains(&domain_count) {
        return Err(PromptError::DomainCountOutOfRange(domain_count));
    }
    build(
        PromptKind::Explore,
        slots([
            ("domain_explored", render_domain_list(explored)),
            ("template", t.render()),
            ("domain_count", domain_count.to_string()),
        ]),
    )
}

pub fn generate_sql_prompt(domain: &str, t: &Template) -> PromptRequest {
    build(PromptKind::GenerateSql, slots([("domain", domain.to_string()), ("template", t.render())]))
        .expect("all slots supplied")
}

pub fn generate_schema_prompt(domain: &str, sql: &SqlAst) -> PromptRequest {
    build(PromptKind::GenerateSchema, slots([("domain", domain.to_string()), ("sql", render_sql(sql))]))
        .expect("all slots supplied")
}

pub fn reverse_translate_prompt(sql: &SqlAst, schema: &Schema) -> PromptRequest {
    build(PromptKind::ReverseTranslate, slots([("sql", render_sql(sql)), ("schema", render_ddl(schema))]))
        .expect("all slots supplied")
}

/// Line following `prefix` in a filled prompt, used to read slot values back
/// out of recorded prompts.
pub fn slot_line<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::Provenance;

    fn t(text: &str) -> Template {
        Template::parse(text, Provenance::Seed).unwrap()
    }

    #[test]
    fn explore_slots() {
        let p = explore_prompt(&["advertising"], &t("SELECT [column] FROM [table]"), 1).unwrap();
        assert!(p.filled_text.contains("    - Existing domains: advertising\n"));
        assert!(p.filled_text.contains("2. Template: SELECT [column] FROM [table]\n"));
        assert!(p.filled_text.contains("Limit the domain name to 1 word(s)."));
        let empty: [&str; 0] = [];
        let p = explore_prompt(&empty, &t("SELECT [column] FROM [table]"), 2).unwrap();
        assert!(p.filled_text.contains("Existing domains: (none)\n"));
        assert_eq!(
            explore_prompt(&empty, &t("SELECT [column] FROM [table]"), 4),
            Err(PromptError::DomainCountOutOfRange(4))
        );
    }

    #[test]
    fn domain_list_cap() {
        let names: Vec<String> = (0..250).map(|i| format!("d{i}")).collect();
        let listed = render_domain_list(&names);
        assert_eq!(listed.split(", ").count(), MAX_LISTED_DOMAINS);
        assert!(listed.starts_with("d50, "));
        assert!(listed.ends_with("d249"));
    }

    #[test]
    fn single_pass_fill() {
        let s = slots([("a", "{b}".to_string()), ("b", "x".to_string())]);
        assert_eq!(fill_slots("{a} {b} {not a slot} {}", &s).unwrap(), "{b} x {not a slot} {}");
        assert_eq!(fill_slots("{c}", &s), Err(PromptError::MissingSlot("c".into())));
    }

    #[test]
    fn no_residual_markers() {
        let sql = crate::ast::parse_sql("SELECT a FROM t WHERE b = '{domain}'").unwrap();
        let p = generate_schema_prompt("x", &sql);
        assert!(p.filled_text.contains("2. SQLite:SELECT a FROM t WHERE b = '{domain}'\n"));
        for kind in PromptKind::ALL {
            let marker_names: Vec<&str> = kind
                .template_text()
                .split('{')
                .skip(1)
                .filter_map(|s| s.split_once('}').map(|(n, _)| n))
                .filter(|n| is_slot_name(n))
                .collect();
            assert!(!marker_names.is_empty());
        }
    }

    #[test]
    fn hash_ignores_slots() {
        let mut a = generate_sql_prompt("x", &t("SELECT [column] FROM [table]"));
        let h = a.hash();
        a.slots.clear();
        assert_eq!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }
}
