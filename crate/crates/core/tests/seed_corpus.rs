use std::path::PathBuf;

use sqlforge_core::ast::{parse_sql, render_sql};
use sqlforge_core::dataset::{load_seed, SeedFormat};
use sqlforge_core::schema::{check_consistency, infer_schema, read_ddl};
use sqlforge_core::template::{fill_template, matches_template, templatize_with_bindings};
use sqlforge_core::validator::{validate_executability, Execution};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn statements() -> Vec<String> {
    let text = std::fs::read_to_string(fixtures().join("seed_statements.sql")).unwrap();
    text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

#[test]
fn every_seed_statement_round_trips_through_its_template() {
    let stmts = statements();
    assert_eq!(stmts.len(), 50);
    for (i, s) in stmts.iter().enumerate() {
        let ast = parse_sql(s).unwrap_or_else(|e| panic!("line {}: {e}", i + 1));
        let (t, bindings) = templatize_with_bindings(&ast);
        let filled = fill_template(&t, &bindings).unwrap_or_else(|e| panic!("line {}: {e}", i + 1));
        assert_eq!(render_sql(&filled), render_sql(&ast), "line {}", i + 1);
        assert!(matches_template(&ast, &t), "line {}", i + 1);
        let again = parse_sql(&render_sql(&ast)).unwrap();
        assert_eq!(render_sql(&again), render_sql(&ast), "line {}", i + 1);
    }
}

#[test]
fn mini_spider_loads_with_six_skips() {
    let load = load_seed(&fixtures().join("mini_spider"), SeedFormat::Spider).unwrap();
    assert_eq!(load.samples.len(), 44);
    let skipped: Vec<usize> = load.skipped.iter().map(|s| s.index).collect();
    assert_eq!(skipped, vec![4, 12, 20, 28, 36, 43]);
}

#[test]
fn mini_spider_samples_run_against_their_schemas() {
    let load = load_seed(&fixtures().join("mini_spider"), SeedFormat::Spider).unwrap();
    let mut bad = Vec::new();
    for s in &load.samples {
        let report = check_consistency(&s.schema, &s.sql);
        if !report.is_consistent() {
            bad.push(format!("{}: {:?}", render_sql(&s.sql), report.violations));
        }
        let exec = validate_executability(&s.schema, &s.sql).unwrap();
        if exec != Execution::Pass {
            bad.push(format!("{}: {exec:?}", render_sql(&s.sql)));
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn inferred_schemas_are_consistent_with_their_statements() {
    let mut accepted = 0;
    for s in statements() {
        let ast = parse_sql(&s).unwrap();
        let Ok(schema) = infer_schema(&ast) else { continue };
        accepted += 1;
        let report = check_consistency(&schema, &ast);
        assert!(report.is_consistent(), "{s}: {:?}", report.violations);
    }
    assert!(accepted >= 40, "only {accepted} statements accepted");
}

#[test]
fn table1_pair_is_consistent_and_executes() {
    let dir = fixtures().join("table1");
    let schema = read_ddl(&std::fs::read_to_string(dir.join("schema.sql")).unwrap()).unwrap();
    let sql = parse_sql(std::fs::read_to_string(dir.join("query.sql")).unwrap().trim()).unwrap();
    assert!(check_consistency(&schema, &sql).is_consistent());
    assert_eq!(validate_executability(&schema, &sql).unwrap(), Execution::Pass);
}
