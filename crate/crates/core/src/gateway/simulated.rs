//! Offline stand-in for a model: answers each prompt kind from its slots,
//! deterministically in the prompt hash and the number of times that prompt
//! has been seen in the caller's scope. Used for golden fixtures and for
//! exercising the pipeline without network access.
//!
//! The first answer to roughly one prompt in five is deliberately flawed
//! (a taken domain, prose, a dropped column, an echoed query) so retry and
//! rejection paths get exercised; later answers to the same prompt are clean.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Backend, BackendRequest, Completion, GatewayError};
use crate::ast::{is_keyword, parse_sql, render_node, ClauseKind, FillType, Node, NodeKind, TokenClass};
use crate::foundry::normalize_domain;
use crate::prompt::PromptKind;
use crate::schema::{infer_schema_lenient, render_ddl, Column, SqlType};
use crate::template::Template;

const DOMAIN_WORDS: &[&str] = &[
    "aquaponics",
    "archery",
    "astronomy",
    "beekeeping",
    "bookbinding",
    "botany",
    "brewing",
    "calligraphy",
    "cartography",
    "ceramics",
    "cheesemaking",
    "choir",
    "composting",
    "cycling",
    "dentistry",
    "dairy",
    "diving",
    "falconry",
    "fencing",
    "ferries",
    "forestry",
    "foundry",
    "glassblowing",
    "hydrology",
    "ice",
    "irrigation",
    "jewelry",
    "kayaking",
    "kennels",
    "lighthouses",
    "locksmithing",
    "marina",
    "meteorology",
    "mining",
    "mountain",
    "museum",
    "orchards",
    "origami",
    "paleontology",
    "parking",
    "perfumery",
    "pharmacy",
    "pottery",
    "printing",
    "quarry",
    "radio",
    "railway",
    "recycling",
    "robotics",
    "rowing",
    "sailing",
    "seismology",
    "shipyard",
    "skating",
    "solar",
    "stadium",
    "tailoring",
    "tannery",
    "tea",
    "telescope",
    "textiles",
    "theatre",
    "tidal",
    "toy",
    "tram",
    "translation",
    "tutoring",
    "upholstery",
    "vineyard",
    "volcano",
    "warehouse",
    "weaving",
    "wetland",
    "wind",
    "winery",
    "wool",
    "zoo",
    "aviary",
    "bakery",
    "cannery",
];

const DOMAIN_TAILS: &[&str] = &[
    "services",
    "logistics",
    "network",
    "studio",
    "cooperative",
    "registry",
    "league",
    "clinic",
    "archive",
    "workshop",
    "exchange",
    "supply",
    "festival",
    "academy",
    "rental",
    "monitoring",
    "maintenance",
    "tours",
];

const TABLE_NOUNS: &[&str] = &[
    "stations",
    "visits",
    "members",
    "events",
    "items",
    "sites",
    "staff",
    "payments",
    "shipments",
    "sensors",
    "bookings",
    "vendors",
    "batches",
    "routes",
    "crews",
    "permits",
    "lessons",
    "repairs",
    "orders_log",
    "suppliers",
];

const COLUMN_NOUNS: &[&str] = &[
    "name", "title", "category", "city", "status", "amount", "price", "score", "quantity", "rating", "region", "label",
    "level", "weight", "capacity", "duration", "cost", "grade", "code", "country", "color", "size",
];

const ALIAS_NOUNS: &[&str] = &["total", "tally", "average_value", "top_value", "share", "figure", "measure"];

const STRING_VALUES: &[&str] = &["north", "gold", "active", "spring", "standard", "premium", "closed", "east"];

pub struct SimulatedBackend {
    seen: Mutex<HashMap<(Option<String>, String), u32>>,
}

impl Default for SimulatedBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatedBackend {
    pub fn new() -> Self {
        Self { seen: Mutex::new(HashMap::new()) }
    }
}

impl Backend for SimulatedBackend {
    fn id(&self) -> String {
        "simulated".into()
    }

    fn complete(&self, req: &BackendRequest<'_>) -> Result<Completion, GatewayError> {
        let attempt = {
            let mut seen = self.seen.lock().expect("simulated counter");
            let n = seen.entry((req.scope.map(str::to_string), req.hash.clone())).or_default();
            *n += 1;
            *n - 1
        };
        let seed = u64::from_str_radix(&req.hash[..16], 16).unwrap_or(0);
        let flawed = attempt == 0 && seed.is_multiple_of(5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(attempt).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let slot = |name: &str| req.prompt.slots.get(name).map(String::as_str).unwrap_or("");
        let text = match req.prompt.kind {
            PromptKind::Explore => {
                explore(slot("template"), slot("domain_explored"), slot("domain_count"), flawed, &mut rng)
            }
            PromptKind::GenerateSql => match fill(slot("template"), &mut rng) {
                Some(sql) if flawed => format!("Here is a query for the {} domain: {sql}", slot("domain")),
                Some(sql) => sql,
                None => "I could not follow that template.".into(),
            },
            PromptKind::GenerateSchema => schema(slot("sql"), flawed),
            PromptKind::ReverseTranslate if flawed => slot("sql").to_string(),
            PromptKind::ReverseTranslate => question(slot("sql")),
        };
        Ok(Completion::text(text))
    }
}

fn explore(template: &str, listed: &str, count: &str, flawed: bool, rng: &mut ChaCha8Rng) -> String {
    let taken: HashSet<String> = listed.split(", ").map(normalize_domain).collect();
    let words = count.trim().parse::<usize>().unwrap_or(1).clamp(1, 3);
    let domain = if flawed { listed.split(", ").next().filter(|d| *d != "(none)").map(str::to_string) } else { None };
    let domain = domain.unwrap_or_else(|| fresh_domain(words, &taken, rng));
    match fill(template, rng) {
        Some(sql) => format!("Domain: {domain}\nSQLite: {sql}"),
        None => format!("Domain: {domain}"),
    }
}

fn fresh_domain(words: usize, taken: &HashSet<String>, rng: &mut ChaCha8Rng) -> String {
    let mut candidate = String::new();
    for _ in 0..64 {
        let mut parts: Vec<&str> = DOMAIN_WORDS.choose_multiple(rng, words.min(2)).copied().collect();
        if words == 3 {
            parts.push(DOMAIN_TAILS.choose(rng).copied().unwrap_or("services"));
        }
        candidate = parts.join(" ");
        if !taken.contains(&candidate) {
            break;
        }
    }
    candidate
}

/// Fills a rendered template with invented names, keeping qualifiers in
/// scope: table aliases come from the statement's own FROM/JOIN clauses.
fn fill(template: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    let t = Template::parse(template.trim(), crate::template::Provenance::Seed).ok()?;
    let mut f = Filler::new(rng);
    let root = f.node(&t.skeleton, Ctx::Other);
    Some(render_node(&root))
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Other,
    TableRefName,
    TableAlias,
    ResultAlias,
    Qualifier(FillType),
}

#[derive(Default)]
struct ScopeEntry {
    table: Option<String>,
    alias: Option<String>,
}

struct Filler<'r> {
    rng: &'r mut ChaCha8Rng,
    tables: Vec<&'static str>,
    columns: Vec<&'static str>,
    aliases: Vec<&'static str>,
    used: HashSet<String>,
    scopes: Vec<Vec<ScopeEntry>>,
    table_aliases: usize,
    pick: usize,
}

impl<'r> Filler<'r> {
    fn new(rng: &'r mut ChaCha8Rng) -> Self {
        let mut tables = TABLE_NOUNS.to_vec();
        let mut columns = COLUMN_NOUNS.to_vec();
        let mut aliases = ALIAS_NOUNS.to_vec();
        tables.shuffle(rng);
        columns.shuffle(rng);
        aliases.shuffle(rng);
        Self { rng, tables, columns, aliases, used: HashSet::new(), scopes: Vec::new(), table_aliases: 0, pick: 0 }
    }

    /// Next unused name from `pool`, numbered once the pool runs dry.
    fn fresh(&mut self, pool: &[&'static str], n: usize) -> String {
        let base = pool[n % pool.len()];
        let mut name = base.to_string();
        let mut k = 2;
        while self.used.contains(&name) || is_keyword(&name) {
            name = format!("{base}{k}");
            k += 1;
        }
        self.used.insert(name.clone());
        name
    }

    fn node(&mut self, node: &Node, ctx: Ctx) -> Node {
        match node {
            Node::Placeholder(ft) => self.placeholder(*ft, ctx),
            Node::Leaf(_) => node.clone(),
            Node::Branch(b) => match b.kind {
                NodeKind::Statement => {
                    self.scopes.push(Vec::new());
                    let is_source =
                        |c: &Node| matches!(c.kind(), Some(NodeKind::Clause(ClauseKind::From | ClauseKind::Join)));
                    let mut out: Vec<Option<Node>> = vec![None; b.children.len()];
                    for (i, c) in b.children.iter().enumerate().filter(|(_, c)| is_source(c)) {
                        out[i] = Some(self.node(c, Ctx::Other));
                    }
                    for (i, c) in b.children.iter().enumerate().filter(|(_, c)| !is_source(c)) {
                        out[i] = Some(self.node(c, Ctx::Other));
                    }
                    self.scopes.pop();
                    Node::branch(b.kind, out.into_iter().map(|n| n.expect("every child filled")).collect())
                }
                NodeKind::TableRef => {
                    let mut entry = ScopeEntry::default();
                    let children: Vec<Node> = b
                        .children
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let ctx = if i == 0 { Ctx::TableRefName } else { Ctx::TableAlias };
                            let filled = self.node(c, ctx);
                            match (i, &filled) {
                                (0, Node::Leaf(t)) => entry.table = Some(t.text.clone()),
                                (_, Node::Branch(a)) if a.kind == NodeKind::Alias => {
                                    entry.alias = a.children.last().and_then(Node::as_token).map(|t| t.text.clone());
                                }
                                _ => {}
                            }
                            filled
                        })
                        .collect();
                    if let Some(scope) = self.scopes.last_mut() {
                        scope.push(entry);
                    }
                    Node::branch(b.kind, children)
                }
                NodeKind::Alias => {
                    let inner = if ctx == Ctx::TableAlias { Ctx::TableAlias } else { Ctx::ResultAlias };
                    Node::branch(b.kind, b.children.iter().map(|c| self.node(c, inner)).collect())
                }
                NodeKind::ColumnRef if b.children.len() == 3 => {
                    let children = b
                        .children
                        .iter()
                        .enumerate()
                        .map(|(i, c)| match (i, c) {
                            (0, Node::Placeholder(ft)) => self.placeholder(*ft, Ctx::Qualifier(*ft)),
                            _ => self.node(c, Ctx::Other),
                        })
                        .collect();
                    Node::branch(b.kind, children)
                }
                _ => Node::branch(b.kind, b.children.iter().map(|c| self.node(c, Ctx::Other)).collect()),
            },
        }
    }

    fn placeholder(&mut self, ft: FillType, ctx: Ctx) -> Node {
        let n = self.used.len();
        let text = match (ft, ctx) {
            (FillType::NumValue, _) => {
                return Node::leaf(TokenClass::NumericLiteral, self.rng.gen_range(1..=50).to_string())
            }
            (FillType::StrValue, _) => {
                let v = STRING_VALUES[self.rng.gen_range(0..STRING_VALUES.len())];
                return Node::leaf(TokenClass::StringLiteral, v);
            }
            (FillType::Alias, Ctx::TableAlias) => {
                self.table_aliases += 1;
                let mut name = format!("T{}", self.table_aliases);
                while self.used.contains(&name) {
                    self.table_aliases += 1;
                    name = format!("T{}", self.table_aliases);
                }
                self.used.insert(name.clone());
                name
            }
            (FillType::Alias, Ctx::Qualifier(_)) => self.qualifier(|e| e.alias.clone()).unwrap_or_else(|| "T1".into()),
            (FillType::Table, Ctx::Qualifier(_)) => {
                match self.qualifier(|e| e.alias.is_none().then(|| e.table.clone()).flatten()) {
                    Some(t) => t,
                    None => self.qualifier(|e| e.table.clone()).unwrap_or_else(|| {
                        let tables = self.tables.clone();
                        self.fresh(&tables, n)
                    }),
                }
            }
            (FillType::Alias, _) => {
                let aliases = self.aliases.clone();
                self.fresh(&aliases, n)
            }
            (FillType::Table, _) => {
                let tables = self.tables.clone();
                self.fresh(&tables, n)
            }
            (FillType::Column, _) => {
                let columns = self.columns.clone();
                self.fresh(&columns, n)
            }
        };
        Node::leaf(TokenClass::Identifier, text)
    }

    /// Cycles over the innermost scope that offers a candidate.
    fn qualifier(&mut self, get: impl Fn(&ScopeEntry) -> Option<String>) -> Option<String> {
        let candidates: Vec<String> =
            self.scopes.iter().rev().map(|s| s.iter().filter_map(&get).collect::<Vec<_>>()).find(|c| !c.is_empty())?;
        self.pick += 1;
        Some(candidates[(self.pick - 1) % candidates.len()].clone())
    }
}

fn schema(sql: &str, flawed: bool) -> String {
    let Ok(ast) = parse_sql(sql) else {
        return "The query could not be read.".into();
    };
    let mut s = infer_schema_lenient(&ast);
    for t in &mut s.tables {
        if t.primary_key().is_none() && t.column("id").is_none() {
            t.columns.insert(0, Column::primary("id", SqlType::Integer));
        }
    }
    if flawed {
        let fk_columns: HashSet<(String, String)> = s
            .tables
            .iter()
            .flat_map(|t| t.foreign_keys.iter().map(move |fk| (t.name.clone(), fk.local_column.clone())))
            .collect();
        if let Some(t) = s.tables.iter_mut().find(|t| t.columns.iter().any(|c| !c.is_primary_key)) {
            let name = t.name.clone();
            if let Some(i) = t
                .columns
                .iter()
                .rposition(|c| !c.is_primary_key && !fk_columns.contains(&(name.clone(), c.name.clone())))
            {
                t.columns.remove(i);
            }
        }
    }
    render_ddl(&s)
}

fn words(ident: &str) -> String {
    ident.replace('_', " ").to_lowercase()
}

/// A plain-English question naming the query's tables and columns.
fn question(sql: &str) -> String {
    let Ok(ast) = parse_sql(sql) else {
        return "what does this query return?".into();
    };
    let refs = crate::schema::analyze_references(&ast);
    let mut columns: Vec<String> = Vec::new();
    for u in &refs.columns {
        let c = match u {
            crate::schema::ColumnUse::Resolved { column, .. } | crate::schema::ColumnUse::Ambiguous { column, .. } => {
                column
            }
        };
        let w = words(c);
        if !columns.contains(&w) {
            columns.push(w);
        }
    }
    let tables: Vec<String> = refs.tables.iter().map(|t| words(t)).collect();
    let kinds = ast.clause_kinds();
    let counts = ast.tokens().any(|t| t.class == TokenClass::FunctionName && t.text.eq_ignore_ascii_case("count"));
    let mut q = if counts { "How many records".to_string() } else { "What are the".to_string() };
    if !counts && !columns.is_empty() {
        q.push(' ');
        q.push_str(&columns.iter().take(3).cloned().collect::<Vec<_>>().join(", "));
    }
    let subject = match tables.split_last() {
        None => "records".to_string(),
        Some((last, [])) => last.clone(),
        Some((last, rest)) => format!("{} and {last}", rest.join(", ")),
    };
    q.push_str(&format!(" of the {subject}"));
    if kinds.contains(&ClauseKind::Where) {
        q.push_str(" matching the given conditions");
    }
    if kinds.contains(&ClauseKind::GroupBy) {
        q.push_str(", per group");
    }
    if kinds.contains(&ClauseKind::OrderBy) {
        q.push_str(", in ranked order");
    }
    if let Some(limit) = ast.root.clause(ClauseKind::Limit) {
        if let Some(n) =
            limit.leaves().into_iter().filter_map(Node::as_token).find(|t| t.class == TokenClass::NumericLiteral)
        {
            q.push_str(&format!(", keeping the first {}", n.text));
        }
    }
    q.push('?');
    q
}
