//! Domain exploration, domain-bound SQL generation and reverse translation.

mod registry;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{parse_sql, SqlAst};
use crate::gateway::{GatewayError, LlmGateway};
use crate::prompt::{self, PromptError, PromptRequest};
use crate::schema::{check_consistency, ConsistencyReport, Schema};
use crate::template::{matches_template, Template};

pub use registry::{domain_word_count, normalize_domain, DomainEntry, DomainRegistry, DomainSource, RegistryError};

pub const DEFAULT_BUDGET: u32 = 3;

/// Why one model reply was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "kebab-case")]
pub enum Rejection {
    DuplicateDomain(String),
    WordCount(String),
    Parse(String),
    TemplateMismatch(String),
    Empty(String),
    Echo(String),
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::DuplicateDomain(_) => "duplicate-domain",
            Rejection::WordCount(_) => "word-count",
            Rejection::Parse(_) => "parse",
            Rejection::TemplateMismatch(_) => "template-mismatch",
            Rejection::Empty(_) => "empty",
            Rejection::Echo(_) => "echo",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            Rejection::DuplicateDomain(d)
            | Rejection::WordCount(d)
            | Rejection::Parse(d)
            | Rejection::TemplateMismatch(d)
            | Rejection::Empty(d)
            | Rejection::Echo(d) => d,
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code(), self.detail())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FoundryError {
    #[error("exploration failed after {} attempt(s)", rejections.len())]
    ExplorationFailed { rejections: Vec<Rejection> },
    #[error("SQL generation failed after {} attempt(s)", rejections.len())]
    GenerationFailed { rejections: Vec<Rejection> },
    #[error("reverse translation failed after {} attempt(s)", rejections.len())]
    TranslationFailed { rejections: Vec<Rejection> },
    #[error("domain {0:?} is not in the registry")]
    UnknownDomain(String),
    #[error("schema does not support the SQL: {0:?}")]
    InconsistentSchema(ConsistencyReport),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl FoundryError {
    /// Per-attempt rejections, when the failure is a budget exhaustion.
    pub fn rejections(&self) -> &[Rejection] {
        match self {
            FoundryError::ExplorationFailed { rejections }
            | FoundryError::GenerationFailed { rejections }
            | FoundryError::TranslationFailed { rejections } => rejections,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationResult {
    pub domain_name: String,
    pub auxiliary_sql: SqlAst,
    pub template_id: String,
    pub round: u32,
    /// Replies rejected before the accepted one.
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated<T> {
    pub value: T,
    pub rejections: Vec<Rejection>,
}

/// Drops Markdown code fences, keeping the fenced text.
pub fn strip_fences(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}

fn strip_label<'a>(line: &'a str, labels: &[&str]) -> Option<&'a str> {
    let t = line.trim_start().trim_start_matches(['*', '#', ' ']);
    labels.iter().find_map(|l| {
        let head = t.get(..l.len())?;
        head.eq_ignore_ascii_case(l).then(|| t[l.len()..].trim_start_matches('*').trim())
    })
}

fn trim_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('\u{201c}', '\u{201d}'), ('\u{2018}', '\u{2019}')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}

/// Splits an exploration reply into its domain line and SQL text.
pub fn parse_exploration_reply(reply: &str) -> Result<(String, String), Rejection> {
    let text = strip_fences(reply);
    let mut domain = None;
    let mut sql_lines: Vec<&str> = Vec::new();
    let mut in_sql = false;
    for line in text.lines() {
        if let Some(d) = strip_label(line, &["Domain:"]) {
            domain = Some(trim_quotes(d).to_string());
            in_sql = false;
        } else if let Some(s) = strip_label(line, &["SQLite:", "SQL:"]) {
            sql_lines.push(s);
            in_sql = true;
        } else if in_sql && !line.trim().is_empty() {
            sql_lines.push(line.trim());
        }
    }
    let domain =
        domain.filter(|d| !d.is_empty()).ok_or_else(|| Rejection::Parse("reply has no Domain: line".into()))?;
    let sql = sql_lines.join(" ").trim().to_string();
    if sql.is_empty() {
        return Err(Rejection::Parse("reply has no SQLite: line".into()));
    }
    Ok((domain, sql))
}

/// SQL text of a generation reply: fences and a leading label removed.
pub fn extract_sql(reply: &str) -> String {
    let text = strip_fences(reply);
    let text = text.trim();
    let body = strip_label(text, &["SQLite:", "SQL:"]).unwrap_or(text);
    trim_quotes(body).to_string()
}

const ECHO_KEYWORDS: &[&str] = &[
    "SELECT",
    "FROM",
    "WHERE",
    "JOIN",
    "GROUP",
    "ORDER",
    "HAVING",
    "LIMIT",
    "UNION",
    "INTERSECT",
    "EXCEPT",
    "DISTINCT",
];

/// Cleans a reverse-translation reply and applies the anti-echo guard.
pub fn clean_question(reply: &str) -> Result<String, Rejection> {
    let text = strip_fences(reply);
    let text = text.trim();
    let text = strip_label(text, &["Question:"]).unwrap_or(text);
    let q = trim_quotes(text).to_string();
    if q.is_empty() {
        return Err(Rejection::Empty("reply is empty".into()));
    }
    if let Some(kw) = q.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).find(|w| ECHO_KEYWORDS.contains(w)) {
        return Err(Rejection::Echo(format!("reply contains SQL keyword {kw}")));
    }
    Ok(q)
}

fn parse_and_match(sql_text: &str, t: &Template) -> Result<SqlAst, Rejection> {
    let ast = parse_sql(sql_text).map_err(|e| Rejection::Parse(e.to_string()))?;
    if !matches_template(&ast, t) {
        return Err(Rejection::TemplateMismatch(format!("{} does not fit {}", ast, t.render())));
    }
    Ok(ast)
}

/// Model-backed operations sharing one gateway and retry budget.
pub struct Foundry<'a> {
    pub gateway: &'a LlmGateway,
    /// Attempts per call, including the first.
    pub budget: u32,
    pub scope: Option<String>,
}

impl<'a> Foundry<'a> {
    pub fn new(gateway: &'a LlmGateway) -> Self {
        Self { gateway, budget: DEFAULT_BUDGET, scope: None }
    }

    /// Tags every model call with `scope` (see [`LlmGateway::complete_in`]).
    pub fn with_scope(mut self, scope: impl Into<String>) -> Self {
        self.scope = Some(scope.into());
        self
    }

    pub fn with_budget(mut self, budget: u32) -> Self {
        self.budget = budget.max(1);
        self
    }

    fn attempt_loop<T>(
        &self,
        prompt: &PromptRequest,
        mut accept: impl FnMut(&str) -> Result<T, Rejection>,
    ) -> Result<Generated<T>, (Vec<Rejection>, Option<GatewayError>)> {
        let mut rejections = Vec::new();
        for _ in 0..self.budget {
            let reply = self.gateway.complete_in(prompt, self.scope.as_deref()).map_err(|e| (Vec::new(), Some(e)))?;
            match accept(&reply) {
                Ok(value) => return Ok(Generated { value, rejections }),
                Err(r) => {
                    tracing::debug!(kind = %prompt.kind, reason = %r, "reply rejected");
                    rejections.push(r);
                }
            }
        }
        Err((rejections, None))
    }

    pub fn build_explore_prompt(
        registry: &DomainRegistry,
        t: &Template,
        domain_count: u32,
    ) -> Result<PromptRequest, PromptError> {
        prompt::explore_prompt(&registry.names(), t, domain_count)
    }

    /// One exploration round: ask for a new domain with SQL fitting `t` and
    /// register the domain on success.
    pub fn explore_domain(
        &self,
        registry: &mut DomainRegistry,
        t: &Template,
        domain_count: u32,
        round: u32,
    ) -> Result<ExplorationResult, FoundryError> {
        let prompt = Self::build_explore_prompt(registry, t, domain_count)?;
        let reg: &DomainRegistry = registry;
        let outcome = self.attempt_loop(&prompt, |reply| {
            let (domain, sql) = parse_exploration_reply(reply)?;
            if reg.contains(&domain) {
                return Err(Rejection::DuplicateDomain(domain));
            }
            let words = domain_word_count(&domain);
            if words == 0 || words > domain_count as usize {
                return Err(Rejection::WordCount(format!("{domain:?} has {words} word(s), limit {domain_count}")));
            }
            Ok((domain, parse_and_match(&sql, t)?))
        });
        match outcome {
            Ok(Generated { value: (domain, ast), rejections }) => {
                registry.insert(&domain, DomainSource::Explored, round).expect("checked against registry above");
                Ok(ExplorationResult {
                    domain_name: domain,
                    auxiliary_sql: ast,
                    template_id: t.id.clone(),
                    round,
                    rejections,
                })
            }
            Err((_, Some(e))) => Err(e.into()),
            Err((rejections, None)) => Err(FoundryError::ExplorationFailed { rejections }),
        }
    }

    pub fn generate_domain_sql(
        &self,
        registry: &DomainRegistry,
        domain: &str,
        t: &Template,
    ) -> Result<Generated<SqlAst>, FoundryError> {
        if !registry.contains(domain) {
            return Err(FoundryError::UnknownDomain(domain.to_string()));
        }
        let prompt = prompt::generate_sql_prompt(domain, t);
        self.attempt_loop(&prompt, |reply| parse_and_match(&extract_sql(reply), t)).map_err(|(rejections, e)| match e {
            Some(e) => e.into(),
            None => FoundryError::GenerationFailed { rejections },
        })
    }

    pub fn reverse_translate(&self, sql: &SqlAst, schema: &Schema) -> Result<Generated<String>, FoundryError> {
        let report = check_consistency(schema, sql);
        if !report.is_consistent() {
            return Err(FoundryError::InconsistentSchema(report));
        }
        let prompt = prompt::reverse_translate_prompt(sql, schema);
        self.attempt_loop(&prompt, clean_question).map_err(|(rejections, e)| match e {
            Some(e) => e.into(),
            None => FoundryError::TranslationFailed { rejections },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::testing::scripted;
    use crate::prompt::PromptKind;
    use crate::schema::fixtures::{table1_schema, TABLE1_SQL};
    use crate::template::{templatize, Provenance};

    fn tpl(text: &str) -> Template {
        Template::parse(text, Provenance::Seed).unwrap()
    }

    const WHERE_T: &str = "SELECT [column] FROM [table] WHERE [column] > [number]";

    #[test]
    fn reply_parsing() {
        assert_eq!(
            parse_exploration_reply("Domain: Logistics\nSQLite: SELECT a FROM t").unwrap(),
            ("Logistics".into(), "SELECT a FROM t".into())
        );
        assert_eq!(
            parse_exploration_reply("**Domain:** \"Cold Chain\"\n```sql\nSQLite:\nSELECT a\nFROM t\n```").unwrap(),
            ("Cold Chain".into(), "SELECT a FROM t".into())
        );
        assert!(matches!(parse_exploration_reply("SELECT a FROM t"), Err(Rejection::Parse(_))));
        assert!(matches!(parse_exploration_reply("Domain: x"), Err(Rejection::Parse(_))));
        assert_eq!(extract_sql("```sql\nSELECT a FROM t;\n```"), "SELECT a FROM t;");
        assert_eq!(extract_sql("SQLite: SELECT 1"), "SELECT 1");
    }

    #[test]
    fn question_cleaning() {
        assert_eq!(clean_question("  \"How many loans are overdue?\" \n").unwrap(), "How many loans are overdue?");
        assert_eq!(clean_question("Question: Which hives are big?").unwrap(), "Which hives are big?");
        assert!(matches!(clean_question(TABLE1_SQL), Err(Rejection::Echo(_))));
        assert!(matches!(clean_question("  \"\" "), Err(Rejection::Empty(_))));
        // lowercase words that happen to be keywords are fine
        assert!(clean_question("Which orders came from Ohio, grouped by city?").is_ok());
    }

    #[test]
    fn exploration_happy_path() {
        let gw = scripted(&[(
            PromptKind::Explore,
            &["Domain: logistics\nSQLite: SELECT city FROM depots WHERE capacity > 500"],
        )]);
        let mut reg = DomainRegistry::from_seed(&["advertising"]);
        let t = tpl(WHERE_T);
        let r = Foundry::new(&gw).explore_domain(&mut reg, &t, 1, 1).unwrap();
        assert_eq!(r.domain_name, "logistics");
        assert_eq!(r.template_id, t.id);
        assert!(r.rejections.is_empty());
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.entries()[1].source, DomainSource::Explored);
    }

    #[test]
    fn exploration_rejections() {
        let gw = scripted(&[(
            PromptKind::Explore,
            &[
                "Domain: Advertising\nSQLite: SELECT a FROM t WHERE b > 1",
                "Domain: Cold Chain Logistics\nSQLite: SELECT a FROM t WHERE b > 1",
                "Domain: Logistics\nSQLite: SELECT a FROM t",
                "Domain: Logistics\nSQLite: SELECT a FROM",
            ],
        )]);
        let mut reg = DomainRegistry::from_seed(&["advertising"]);
        let err = Foundry::new(&gw).with_budget(4).explore_domain(&mut reg, &tpl(WHERE_T), 2, 1).unwrap_err();
        let codes: Vec<&str> = err.rejections().iter().map(Rejection::code).collect();
        assert_eq!(codes, ["duplicate-domain", "word-count", "template-mismatch", "parse"]);
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn generation() {
        let t = templatize(&parse_sql(TABLE1_SQL).unwrap());
        let reg = DomainRegistry::from_seed(&["advertising"]);
        let gw = scripted(&[(
            PromptKind::GenerateSql,
            &[
                "I am unable to help with that.",
                "SELECT C.CampaignName FROM Campaigns AS C JOIN Impressions AS I ON C.CampaignID = I.CampaignID JOIN Ads AS A ON A.id = I.ad GROUP BY C.CampaignName ORDER BY SUM(I.Clicks) DESC LIMIT 10",
                TABLE1_SQL,
            ],
        )]);
        let g = Foundry::new(&gw).generate_domain_sql(&reg, "Advertising", &t).unwrap();
        assert_eq!(g.value.to_string(), TABLE1_SQL);
        let codes: Vec<&str> = g.rejections.iter().map(Rejection::code).collect();
        assert_eq!(codes, ["parse", "template-mismatch"]);
        assert_eq!(
            Foundry::new(&gw).generate_domain_sql(&reg, "marine biology", &t),
            Err(FoundryError::UnknownDomain("marine biology".into()))
        );
    }

    #[test]
    fn translation() {
        let q = "Which are the top 10 campaigns with the highest total number of clicks?";
        let gw = scripted(&[(PromptKind::ReverseTranslate, &["", TABLE1_SQL, q])]);
        let sql = parse_sql(TABLE1_SQL).unwrap();
        let g = Foundry::new(&gw).reverse_translate(&sql, &table1_schema()).unwrap();
        assert_eq!(g.value, q);
        let codes: Vec<&str> = g.rejections.iter().map(Rejection::code).collect();
        assert_eq!(codes, ["empty", "echo"]);
        let gw = scripted(&[(PromptKind::ReverseTranslate, &[TABLE1_SQL])]);
        assert!(matches!(
            Foundry::new(&gw).reverse_translate(&sql, &table1_schema()),
            Err(FoundryError::TranslationFailed { .. })
        ));
    }
}
