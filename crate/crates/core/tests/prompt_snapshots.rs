use std::path::PathBuf;

use sqlforge_core::ast::parse_sql;
use sqlforge_core::prompt::{
    explore_prompt, generate_schema_prompt, generate_sql_prompt, reverse_translate_prompt, PromptRequest,
};
use sqlforge_core::schema::read_ddl;
use sqlforge_core::template::{Provenance, Template};

const TEMPLATE: &str = "SELECT [column] FROM [table] WHERE [column] > [number]";
const SQL: &str = "SELECT C.CampaignName FROM Campaigns AS C JOIN Impressions AS I ON C.CampaignID = I.CampaignID GROUP BY C.CampaignName ORDER BY SUM(I.Clicks) DESC LIMIT 10";
const DDL: &str = "CREATE TABLE Campaigns (CampaignID INTEGER PRIMARY KEY, CampaignName TEXT);
CREATE TABLE Impressions (ImpressionID INTEGER PRIMARY KEY, CampaignID INTEGER, Clicks INTEGER, FOREIGN KEY (CampaignID) REFERENCES Campaigns(CampaignID));";

fn snapshot(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/prompts").join(format!("{name}.txt"));
    std::fs::read_to_string(p).unwrap()
}

fn check(name: &str, p: &PromptRequest) {
    let want = snapshot(name);
    assert_eq!(p.filled_text, want, "{name}");
    assert_eq!(
        p.filled_text.split_whitespace().collect::<Vec<_>>(),
        want.split_whitespace().collect::<Vec<_>>(),
        "{name}"
    );
}

fn template() -> Template {
    Template::parse(TEMPLATE, Provenance::Seed).unwrap()
}

#[test]
fn explore_snapshot() {
    let p = explore_prompt(&["advertising", "retail banking"], &template(), 2).unwrap();
    check("explore", &p);
    assert!(p.filled_text.contains("Limit the domain name to 2 word(s)."));
}

#[test]
fn generate_sql_snapshot() {
    check("generate_sql", &generate_sql_prompt("advertising", &template()));
}

#[test]
fn generate_schema_snapshot() {
    let p = generate_schema_prompt("advertising", &parse_sql(SQL).unwrap());
    check("generate_schema", &p);
    assert!(p.filled_text.contains("without using ALTER TABLE"));
}

#[test]
fn reverse_translate_snapshot() {
    let p = reverse_translate_prompt(&parse_sql(SQL).unwrap(), &read_ddl(DDL).unwrap());
    check("reverse_translate", &p);
}
